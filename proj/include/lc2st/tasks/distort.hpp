#ifndef LC2ST_TASKS_DISTORT_HPP
#define LC2ST_TASKS_DISTORT_HPP

#include <cmath>
#include <functional>
#include <memory>

#include "lc2st/tasks/task.hpp"

namespace lc2st {

/// Controlled "bad estimator": theta' = shift + scale * (theta - mu) + mu,
/// with theta a base draw and mu the base mean at x. The scale may depend on
/// x, which gives estimators whose quality varies across observations.
class DistortedPosterior : public ReferencePosterior {
public:
    using ScaleFn = std::function<double(const Vector&)>;

    DistortedPosterior(std::shared_ptr<const ReferencePosterior> base, Vector shift, double scale)
        : DistortedPosterior(std::move(base), std::move(shift), [scale](const Vector&) { return scale; }) {
        if (!(scale > 0.0) || !std::isfinite(scale)) {
            throw ConfigError("distort: scale must be positive");
        }
        constant_scale_ = scale;
    }

    DistortedPosterior(std::shared_ptr<const ReferencePosterior> base, Vector shift, ScaleFn scale_fn)
        : base_(std::move(base)), shift_(std::move(shift)), scale_fn_(std::move(scale_fn)) {
        if (!base_) {
            throw ConfigError("distort: base posterior is null");
        }
        if (shift_.size() == 0) {
            shift_ = Vector::Zero(base_->theta_dim());
        }
        if (shift_.size() != base_->theta_dim()) {
            throw ConfigError("distort: mean_shift length must equal theta dimension");
        }
        require_finite(shift_, "distort mean_shift");
    }

    int theta_dim() const override { return base_->theta_dim(); }
    const Vector& shift() const { return shift_; }
    double scale_at(const Vector& x) const { return scale_fn_(x); }

    /// True when the map is the identity for every x (zero shift, unit
    /// constant scale).
    bool is_identity() const { return shift_.isZero(0.0) && constant_scale_ == 1.0; }

    Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const override {
        const double s = checked_scale(x);
        const Vector mu = base_->mean(x);
        Matrix draws = base_->sample(x, n, rng);
        draws.rowwise() -= mu.transpose();
        draws *= s;
        draws.rowwise() += (mu + shift_).transpose();
        return draws;
    }

    Matrix sample_each(const Matrix& xs, RngStream& rng) const override {
        Matrix draws = base_->sample_each(xs, rng);
        for (Eigen::Index i = 0; i < xs.rows(); ++i) {
            const Vector x = xs.row(i).transpose();
            const double s = checked_scale(x);
            const Vector mu = base_->mean(x);
            draws.row(i) = (shift_ + mu + s * (draws.row(i).transpose() - mu)).transpose();
        }
        return draws;
    }

    Vector mean(const Vector& x) const override { return base_->mean(x) + shift_; }

    bool has_log_prob() const override { return base_->has_log_prob(); }

    double log_prob(const Vector& theta, const Vector& x) const override {
        const double s = checked_scale(x);
        const Vector mu = base_->mean(x);
        const Vector pre = mu + (theta - shift_ - mu) / s;
        return base_->log_prob(pre, x) - theta_dim() * std::log(s);
    }

private:
    double checked_scale(const Vector& x) const {
        const double s = scale_fn_(x);
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw NumericError("distort: scale function returned a non-positive value");
        }
        return s;
    }

    std::shared_ptr<const ReferencePosterior> base_;
    Vector shift_;
    ScaleFn scale_fn_;
    double constant_scale_ = std::numeric_limits<double>::quiet_NaN();
};

inline std::shared_ptr<DistortedPosterior> distort(std::shared_ptr<const ReferencePosterior> base, Vector mean_shift,
                                                   double scale) {
    return std::make_shared<DistortedPosterior>(std::move(base), std::move(mean_shift), scale);
}

} // namespace lc2st

#endif
