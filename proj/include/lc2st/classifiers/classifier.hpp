#ifndef LC2ST_CLASSIFIERS_CLASSIFIER_HPP
#define LC2ST_CLASSIFIERS_CLASSIFIER_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "lc2st/core/types.hpp"

namespace lc2st {

/**
 * Estimate d(w) of P(C = 1 | w). P(C = 0 | w) is 1 - d(w) by construction;
 * the hard decision is I(d(w) > 1/2), so ties go to class 0.
 */
class ProbClassifier {
public:
    virtual ~ProbClassifier() = default;

    /// One probability per row of `features`, each in [0, 1].
    virtual Vector predict_proba(const Matrix& features) const = 0;

    virtual int input_dim() const = 0;
    virtual std::string kind() const = 0;

    /// Fit diagnostics and, for fitted models, a full checkpoint.
    virtual nlohmann::json to_json() const { return nlohmann::json{{"kind", kind()}, {"input_dim", input_dim()}}; }

    double predict_one(const Vector& w) const { return predict_proba(Matrix(w.transpose()))[0]; }
};

using ClassifierPtr = std::shared_ptr<const ProbClassifier>;

inline int hard_label(double prob) { return prob > 0.5 ? 1 : 0; }

/// d(w) = c for every w.
class ConstantClassifier : public ProbClassifier {
public:
    ConstantClassifier(int input_dim, double value) : dim_(input_dim), value_(value) {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw ConfigError("ConstantClassifier: value must be in [0, 1]");
        }
    }

    Vector predict_proba(const Matrix& features) const override { return Vector::Constant(features.rows(), value_); }
    int input_dim() const override { return dim_; }
    std::string kind() const override { return "constant"; }

private:
    int dim_;
    double value_;
};

/// Wraps an arbitrary per-row probability function.
class FunctionClassifier : public ProbClassifier {
public:
    using Fn = std::function<double(const Vector&)>;

    FunctionClassifier(int input_dim, Fn fn) : dim_(input_dim), fn_(std::move(fn)) {}

    Vector predict_proba(const Matrix& features) const override {
        Vector out(features.rows());
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            out[i] = std::clamp(fn_(features.row(i).transpose()), 0.0, 1.0);
        }
        return out;
    }

    int input_dim() const override { return dim_; }
    std::string kind() const override { return "function"; }

private:
    int dim_;
    Fn fn_;
};

/**
 * Bayes-optimal probability for two known densities,
 * d*(w) = p(w) / (p(w) + q(w)), evaluated in log space:
 * d* = sigmoid(log p - log q).
 */
class AnalyticBayesClassifier : public ProbClassifier {
public:
    using LogDensity = std::function<double(const Vector&)>;

    AnalyticBayesClassifier(int input_dim, LogDensity log_p, LogDensity log_q)
        : dim_(input_dim), log_p_(std::move(log_p)), log_q_(std::move(log_q)) {}

    static double probability(double log_p, double log_q) {
        constexpr double ninf = -std::numeric_limits<double>::infinity();
        if (log_p == ninf && log_q == ninf) {
            throw NumericError("analytic_bayes: both densities are zero at the query point");
        }
        if (std::isnan(log_p) || std::isnan(log_q) || log_p == std::numeric_limits<double>::infinity() ||
            log_q == std::numeric_limits<double>::infinity()) {
            throw NumericError("analytic_bayes: non-finite log-density at the query point");
        }
        if (log_q == ninf) {
            return 1.0;
        }
        if (log_p == ninf) {
            return 0.0;
        }
        return stable_sigmoid(log_p - log_q);
    }

    Vector predict_proba(const Matrix& features) const override {
        Vector out(features.rows());
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            const Vector w = features.row(i).transpose();
            out[i] = probability(log_p_(w), log_q_(w));
        }
        return out;
    }

    int input_dim() const override { return dim_; }
    std::string kind() const override { return "analytic_bayes"; }

private:
    int dim_;
    LogDensity log_p_;
    LogDensity log_q_;
};

inline ClassifierPtr analytic_bayes(int input_dim, AnalyticBayesClassifier::LogDensity log_p,
                                    AnalyticBayesClassifier::LogDensity log_q) {
    return std::make_shared<AnalyticBayesClassifier>(input_dim, std::move(log_p), std::move(log_q));
}

} // namespace lc2st

#endif
