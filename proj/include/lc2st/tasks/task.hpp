#ifndef LC2ST_TASKS_TASK_HPP
#define LC2ST_TASKS_TASK_HPP

#include <cstring>
#include <memory>
#include <string>

#include "lc2st/core/dataset.hpp"
#include "lc2st/core/rng.hpp"

namespace lc2st {

/// Anything that can draw theta ~ q(theta | x): a posterior estimator, a
/// reference posterior, a distorted copy of one.
class ConditionalSampler {
public:
    virtual ~ConditionalSampler() = default;

    virtual int theta_dim() const = 0;

    /// n draws at one observation, one per row.
    virtual Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const = 0;

    /// One draw per row of `xs`. Failures are reported with the row index.
    virtual Matrix sample_each(const Matrix& xs, RngStream& rng) const {
        Matrix out(xs.rows(), theta_dim());
        for (Eigen::Index i = 0; i < xs.rows(); ++i) {
            try {
                out.row(i) = sample(xs.row(i).transpose(), 1, rng).row(0);
            } catch (const Error& e) {
                throw SamplingError(e.what(), static_cast<long>(i));
            }
        }
        return out;
    }
};

/// Ground-truth posterior p(theta | x) of a task. log_prob is optional.
class ReferencePosterior : public ConditionalSampler {
public:
    virtual bool has_log_prob() const { return false; }

    virtual double log_prob(const Vector& /*theta*/, const Vector& /*x*/) const {
        throw OracleUnavailable("reference posterior has no tractable log-density");
    }

    /// Posterior mean. The default is a Monte Carlo estimate from 10^4 draws
    /// whose stream is keyed by the bytes of x, so it is deterministic.
    virtual Vector mean(const Vector& x) const {
        std::uint64_t key = 0x5eed;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            std::uint64_t bits = 0;
            const double v = x[i];
            std::memcpy(&bits, &v, sizeof(bits));
            key = hash_seed(key, bits);
        }
        RngStream rng(key, 0);
        return sample(x, 10000, rng).colwise().mean().transpose();
    }
};

/// Simulator with prior: (theta ~ p(theta), x ~ p(x | theta)).
class Task {
public:
    virtual ~Task() = default;

    virtual std::string name() const = 0;
    virtual int theta_dim() const = 0;
    virtual int x_dim() const = 0;
    virtual Matrix sample_prior(Eigen::Index n, RngStream& rng) const = 0;
    virtual Matrix simulate(const Matrix& thetas, RngStream& rng) const = 0;

    /// Null when the task has no reference posterior.
    virtual std::shared_ptr<const ReferencePosterior> reference_posterior() const { return nullptr; }

    JointDataset sample_joint(Eigen::Index n, RngStream& rng) const {
        Matrix thetas = sample_prior(n, rng);
        Matrix xs = simulate(thetas, rng);
        if (n == 0) {
            return JointDataset(theta_dim(), x_dim());
        }
        return JointDataset(std::move(thetas), std::move(xs));
    }

    /// Observation x_o = Simulator(theta_o) for a seeded prior draw theta_o.
    Vector observation(std::uint64_t seed) const {
        RngStream rng(seed, 0x0b5);
        const Matrix theta = sample_prior(1, rng);
        return simulate(theta, rng).row(0).transpose();
    }
};

} // namespace lc2st

#endif
