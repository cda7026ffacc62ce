#ifndef LC2ST_TASKS_TWO_MOONS_HPP
#define LC2ST_TASKS_TWO_MOONS_HPP

#include <cmath>
#include <memory>
#include <numbers>

#include "lc2st/tasks/task.hpp"

namespace lc2st {

/// Crescent noise model of the SBI benchmark:
///   a ~ U(-pi/2, pi/2), r ~ N(0.1, 0.01^2), p = (r cos a + 0.25, r sin a)
///   x = p + (-|theta_0 + theta_1| / sqrt 2, (-theta_0 + theta_1) / sqrt 2)
inline Matrix two_moons_simulate(const Matrix& thetas, RngStream& rng) {
    Matrix out(thetas.rows(), 2);
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
        const double a = rng.uniform(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
        const double r = rng.normal(0.1, 0.01);
        const double t0 = thetas(i, 0);
        const double t1 = thetas(i, 1);
        out(i, 0) = r * std::cos(a) + 0.25 - std::abs(t0 + t1) * inv_sqrt2;
        out(i, 1) = r * std::sin(a) + (-t0 + t1) * inv_sqrt2;
    }
    return out;
}

/// Rejection ABC against the simulator: accept uniform prior draws whose
/// simulated x lies within eps of x_o. Exact as eps -> 0. `budget` caps the
/// number of prior draws per sample() call.
class TwoMoonsRejectionPosterior : public ReferencePosterior {
public:
    TwoMoonsRejectionPosterior(double eps, long budget) : eps_(eps), budget_(budget) {
        if (!(eps > 0.0) || budget < 1) {
            throw ConfigError("two_moons: eps must be positive and budget >= 1");
        }
    }

    int theta_dim() const override { return 2; }
    double eps() const { return eps_; }

    Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const override {
        Matrix out(n, 2);
        Eigen::Index accepted = 0;
        long used = 0;
        constexpr Eigen::Index kChunk = 4096;
        const double eps2 = eps_ * eps_;
        while (accepted < n) {
            if (used >= budget_) {
                throw OracleUnavailable("two_moons rejection oracle: accepted " + std::to_string(accepted) + " of " +
                                        std::to_string(n) + " within budget " + std::to_string(budget_) +
                                        " at eps " + std::to_string(eps_));
            }
            const Eigen::Index chunk = std::min<Eigen::Index>(kChunk, budget_ - used);
            Matrix thetas(chunk, 2);
            for (Eigen::Index i = 0; i < chunk; ++i) {
                thetas(i, 0) = rng.uniform(-1.0, 1.0);
                thetas(i, 1) = rng.uniform(-1.0, 1.0);
            }
            const Matrix xs = two_moons_simulate(thetas, rng);
            used += chunk;
            for (Eigen::Index i = 0; i < chunk && accepted < n; ++i) {
                const double dx = xs(i, 0) - x[0];
                const double dy = xs(i, 1) - x[1];
                if (dx * dx + dy * dy <= eps2) {
                    out.row(accepted++) = thetas.row(i);
                }
            }
        }
        return out;
    }

private:
    double eps_;
    long budget_;
};

class TwoMoonsTask : public Task {
public:
    explicit TwoMoonsTask(double eps = 0.05, long budget = 20'000'000)
        : posterior_(std::make_shared<TwoMoonsRejectionPosterior>(eps, budget)) {}

    std::string name() const override { return "two_moons"; }
    int theta_dim() const override { return 2; }
    int x_dim() const override { return 2; }

    Matrix sample_prior(Eigen::Index n, RngStream& rng) const override {
        Matrix out(n, 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            out(i, 0) = rng.uniform(-1.0, 1.0);
            out(i, 1) = rng.uniform(-1.0, 1.0);
        }
        return out;
    }

    Matrix simulate(const Matrix& thetas, RngStream& rng) const override { return two_moons_simulate(thetas, rng); }

    std::shared_ptr<const ReferencePosterior> reference_posterior() const override { return posterior_; }

private:
    std::shared_ptr<const ReferencePosterior> posterior_;
};

inline std::shared_ptr<TwoMoonsTask> two_moons_task(double eps = 0.05, long budget = 20'000'000) {
    return std::make_shared<TwoMoonsTask>(eps, budget);
}

} // namespace lc2st

#endif
