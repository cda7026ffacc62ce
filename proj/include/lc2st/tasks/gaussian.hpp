#ifndef LC2ST_TASKS_GAUSSIAN_HPP
#define LC2ST_TASKS_GAUSSIAN_HPP

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <utility>

#include "lc2st/core/stats.hpp"
#include "lc2st/tasks/task.hpp"

namespace lc2st {

// ---------------------------------------------------------------------------
// Conjugate Gaussian: theta ~ N(0, I_m), x | theta ~ N(theta, s^2 I_m).
// Posterior N(x / (1 + s^2), s^2 / (1 + s^2) I_m).

class ConjugateGaussianPosterior : public ReferencePosterior {
public:
    ConjugateGaussianPosterior(int m, double noise_std) : m_(m), noise_var_(noise_std * noise_std) {}

    int theta_dim() const override { return m_; }
    double shrinkage() const { return 1.0 / (1.0 + noise_var_); }
    double variance() const { return noise_var_ / (1.0 + noise_var_); }
    double stddev() const { return std::sqrt(variance()); }

    Vector mean(const Vector& x) const override { return shrinkage() * x; }

    Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const override {
        Matrix out = rng.normal_matrix(n, m_) * stddev();
        out.rowwise() += mean(x).transpose();
        return out;
    }

    Matrix sample_each(const Matrix& xs, RngStream& rng) const override {
        Matrix out = rng.normal_matrix(xs.rows(), m_) * stddev();
        out += shrinkage() * xs;
        return out;
    }

    bool has_log_prob() const override { return true; }

    double log_prob(const Vector& theta, const Vector& x) const override {
        const double var = variance();
        return -0.5 * (m_ * (kLogTwoPi + std::log(var)) + (theta - mean(x)).squaredNorm() / var);
    }

private:
    int m_;
    double noise_var_;
};

class GaussianConjugateTask : public Task {
public:
    GaussianConjugateTask(int m, double noise_std) : m_(m), noise_std_(noise_std) {
        if (m < 1) {
            throw ConfigError("gaussian_conjugate: m must be >= 1");
        }
        if (!(noise_std > 0.0) || !std::isfinite(noise_std)) {
            throw ConfigError("gaussian_conjugate: noise_std must be positive");
        }
        posterior_ = std::make_shared<ConjugateGaussianPosterior>(m, noise_std);
    }

    std::string name() const override { return "gaussian_conjugate"; }
    int theta_dim() const override { return m_; }
    int x_dim() const override { return m_; }
    double noise_std() const { return noise_std_; }

    Matrix sample_prior(Eigen::Index n, RngStream& rng) const override { return rng.normal_matrix(n, m_); }

    Matrix simulate(const Matrix& thetas, RngStream& rng) const override {
        return thetas + noise_std_ * rng.normal_matrix(thetas.rows(), m_);
    }

    std::shared_ptr<const ReferencePosterior> reference_posterior() const override { return posterior_; }

    std::shared_ptr<const ConjugateGaussianPosterior> conjugate_posterior() const { return posterior_; }

private:
    int m_;
    double noise_std_;
    std::shared_ptr<const ConjugateGaussianPosterior> posterior_;
};

inline std::shared_ptr<GaussianConjugateTask> gaussian_conjugate_task(int m, double noise_std) {
    return std::make_shared<GaussianConjugateTask>(m, noise_std);
}

// ---------------------------------------------------------------------------
// Two centered isotropic Gaussians differing only in scale.

struct GaussianShiftPair {
    double sigma = 1.0;
    int dim = 2;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma)) {
            throw ConfigError("GaussianShiftPair: sigma must be positive");
        }
        if (dim < 1) {
            throw ConfigError("GaussianShiftPair: dim must be >= 1");
        }
    }

    /// log N(theta; 0, I): the "true" class.
    double log_p(const Vector& theta) const { return -0.5 * (dim * kLogTwoPi + theta.squaredNorm()); }

    /// log N(theta; 0, sigma^2 I): the estimator class.
    double log_q(const Vector& theta) const {
        return -0.5 * (dim * (kLogTwoPi + 2.0 * std::log(sigma)) + theta.squaredNorm() / (sigma * sigma));
    }
};

/// n i.i.d. draws from p = N(0, I) and from q = N(0, sigma^2 I).
inline std::pair<Matrix, Matrix> gaussian_shift_samples(const GaussianShiftPair& pair, Eigen::Index n,
                                                        RngStream& rng) {
    pair.validate();
    if (n < 0) {
        throw ConfigError("gaussian_shift_samples: n must be >= 0");
    }
    Matrix p = rng.normal_matrix(n, pair.dim);
    Matrix q = rng.normal_matrix(n, pair.dim) * pair.sigma;
    return {std::move(p), std::move(q)};
}

// ---------------------------------------------------------------------------
// Truncated univariate normal helpers.

namespace detail {

/// log(Phi(b) - Phi(a)) for standardized bounds a < b.
inline double log_normal_mass(double a, double b) {
    if (a > 0.0) {
        // Use the upper tail for accuracy.
        return std::log(0.5 * std::erfc(a / std::sqrt(2.0)) - 0.5 * std::erfc(b / std::sqrt(2.0)));
    }
    return std::log(stats::normal_cdf(b) - stats::normal_cdf(a));
}

inline double normal_pdf(double z) {
    if (!std::isfinite(z)) {
        return 0.0;
    }
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Mean of N(mu, sd^2) truncated to [lo, hi].
inline double truncated_normal_mean(double mu, double sd, double lo, double hi) {
    const double a = (lo - mu) / sd;
    const double b = (hi - mu) / sd;
    const double mass = std::exp(log_normal_mass(a, b));
    return mu + sd * (normal_pdf(a) - normal_pdf(b)) / mass;
}

/// One draw of N(mu, sd^2) restricted to [lo, hi] by rejection; `budget`
/// counts proposals across calls.
inline double truncated_normal_draw(double mu, double sd, double lo, double hi, RngStream& rng, long& budget) {
    while (budget-- > 0) {
        const double v = rng.normal(mu, sd);
        if (v >= lo && v <= hi) {
            return v;
        }
    }
    throw OracleUnavailable("rejection budget exhausted before acceptance");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Gaussian linear with uniform prior: theta ~ U[lo, hi]^m, x | theta ~
// N(theta, 0.1 I). The posterior is N(x, 0.1 I) truncated to the prior box.

class TruncatedGaussianPosterior : public ReferencePosterior {
public:
    TruncatedGaussianPosterior(int m, double noise_var, double lo, double hi, long budget)
        : m_(m), sd_(std::sqrt(noise_var)), lo_(lo), hi_(hi), budget_(budget) {}

    int theta_dim() const override { return m_; }

    Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const override {
        Matrix out(n, m_);
        long budget = budget_;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < m_; ++j) {
                out(i, j) = detail::truncated_normal_draw(x[j], sd_, lo_, hi_, rng, budget);
            }
        }
        return out;
    }

    bool has_log_prob() const override { return true; }

    double log_prob(const Vector& theta, const Vector& x) const override {
        double lp = 0.0;
        for (int j = 0; j < m_; ++j) {
            if (theta[j] < lo_ || theta[j] > hi_) {
                return -std::numeric_limits<double>::infinity();
            }
            const double z = (theta[j] - x[j]) / sd_;
            lp += -0.5 * (kLogTwoPi + z * z) - std::log(sd_) -
                  detail::log_normal_mass((lo_ - x[j]) / sd_, (hi_ - x[j]) / sd_);
        }
        return lp;
    }

    Vector mean(const Vector& x) const override {
        Vector mu(m_);
        for (int j = 0; j < m_; ++j) {
            mu[j] = detail::truncated_normal_mean(x[j], sd_, lo_, hi_);
        }
        return mu;
    }

private:
    int m_;
    double sd_;
    double lo_;
    double hi_;
    long budget_;
};

class GaussianLinearUniformTask : public Task {
public:
    static constexpr double kNoiseVar = 0.1;

    explicit GaussianLinearUniformTask(int m = 10, double lo = -1.0, double hi = 1.0, long budget = 10'000'000)
        : m_(m), lo_(lo), hi_(hi) {
        if (m < 1 || !(lo < hi)) {
            throw ConfigError("gaussian_linear_uniform: need m >= 1 and lo < hi");
        }
        posterior_ = std::make_shared<TruncatedGaussianPosterior>(m, kNoiseVar, lo, hi, budget);
    }

    std::string name() const override { return "gaussian_linear_uniform"; }
    int theta_dim() const override { return m_; }
    int x_dim() const override { return m_; }

    Matrix sample_prior(Eigen::Index n, RngStream& rng) const override {
        if (!std::isfinite(lo_) || !std::isfinite(hi_)) {
            throw ConfigError("gaussian_linear_uniform: cannot sample an unbounded uniform prior");
        }
        Matrix out(n, m_);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (int j = 0; j < m_; ++j) {
                out(i, j) = rng.uniform(lo_, hi_);
            }
        }
        return out;
    }

    Matrix simulate(const Matrix& thetas, RngStream& rng) const override {
        return thetas + std::sqrt(kNoiseVar) * rng.normal_matrix(thetas.rows(), m_);
    }

    std::shared_ptr<const ReferencePosterior> reference_posterior() const override { return posterior_; }

private:
    int m_;
    double lo_;
    double hi_;
    std::shared_ptr<const ReferencePosterior> posterior_;
};

inline std::shared_ptr<GaussianLinearUniformTask> gaussian_linear_uniform_task(int m = 10, double lo = -1.0,
                                                                               double hi = 1.0,
                                                                               long budget = 10'000'000) {
    return std::make_shared<GaussianLinearUniformTask>(m, lo, hi, budget);
}

// ---------------------------------------------------------------------------
// Gaussian mixture: theta ~ U[-10, 10]^2,
// x | theta ~ 0.5 N(theta, I) + 0.5 N(theta, 0.01 I).
// By symmetry of the likelihood in (theta - x) the posterior is the same
// mixture centred at x, truncated to the prior box; component weights are
// reweighted by their in-box mass.

class MixturePosterior : public ReferencePosterior {
public:
    MixturePosterior(int m, double lo, double hi, long budget) : m_(m), lo_(lo), hi_(hi), budget_(budget) {}

    int theta_dim() const override { return m_; }

    Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const override {
        const auto w = component_log_mass(x);
        const double p_wide = 1.0 / (1.0 + std::exp(w[1] - w[0]));
        Matrix out(n, m_);
        long budget = budget_;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sd = rng.uniform() < p_wide ? kStd[0] : kStd[1];
            for (int j = 0; j < m_; ++j) {
                out(i, j) = detail::truncated_normal_draw(x[j], sd, lo_, hi_, rng, budget);
            }
        }
        return out;
    }

    bool has_log_prob() const override { return true; }

    double log_prob(const Vector& theta, const Vector& x) const override {
        for (int j = 0; j < m_; ++j) {
            if (theta[j] < lo_ || theta[j] > hi_) {
                return -std::numeric_limits<double>::infinity();
            }
        }
        const auto w = component_log_mass(x);
        const double r2 = (theta - x).squaredNorm();
        double comp[2];
        for (int k = 0; k < 2; ++k) {
            comp[k] = std::log(0.5) - 0.5 * (m_ * (kLogTwoPi + 2.0 * std::log(kStd[k])) + r2 / (kStd[k] * kStd[k]));
        }
        const double lse_num = std::max(comp[0], comp[1]) + std::log1p(std::exp(-std::abs(comp[0] - comp[1])));
        const double lse_den = std::max(w[0], w[1]) + std::log1p(std::exp(-std::abs(w[0] - w[1])));
        return lse_num - lse_den;
    }

private:
    static constexpr double kStd[2] = {1.0, 0.1};

    /// log(0.5 * box mass) of each component at x.
    std::array<double, 2> component_log_mass(const Vector& x) const {
        std::array<double, 2> out{};
        for (int k = 0; k < 2; ++k) {
            double lm = std::log(0.5);
            for (int j = 0; j < m_; ++j) {
                lm += detail::log_normal_mass((lo_ - x[j]) / kStd[k], (hi_ - x[j]) / kStd[k]);
            }
            out[k] = lm;
        }
        return out;
    }

    int m_;
    double lo_;
    double hi_;
    long budget_;
};

class GaussianMixtureTask : public Task {
public:
    explicit GaussianMixtureTask(long budget = 10'000'000) {
        posterior_ = std::make_shared<MixturePosterior>(2, -10.0, 10.0, budget);
    }

    std::string name() const override { return "gaussian_mixture"; }
    int theta_dim() const override { return 2; }
    int x_dim() const override { return 2; }

    Matrix sample_prior(Eigen::Index n, RngStream& rng) const override {
        Matrix out(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, 0) = rng.uniform(-10.0, 10.0);
            out(i, 1) = rng.uniform(-10.0, 10.0);
        }
        return out;
    }

    Matrix simulate(const Matrix& thetas, RngStream& rng) const override {
        Matrix out(thetas.rows(), 2);
        for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
            const double sd = rng.uniform() < 0.5 ? 1.0 : 0.1;
            out(i, 0) = thetas(i, 0) + sd * rng.normal();
            out(i, 1) = thetas(i, 1) + sd * rng.normal();
        }
        return out;
    }

    std::shared_ptr<const ReferencePosterior> reference_posterior() const override { return posterior_; }

private:
    std::shared_ptr<const ReferencePosterior> posterior_;
};

inline std::shared_ptr<GaussianMixtureTask> gaussian_mixture_task(long budget = 10'000'000) {
    return std::make_shared<GaussianMixtureTask>(budget);
}

} // namespace lc2st

#endif
