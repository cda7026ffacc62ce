#ifndef LC2ST_C2ST_STATISTICS_HPP
#define LC2ST_C2ST_STATISTICS_HPP

#include <span>
#include <string>

#include "lc2st/classifiers/classifier.hpp"
#include "lc2st/core/dataset.hpp"

namespace lc2st {

/// `literal` sums the two per-class means (range [0, 1/2]); `bounded`
/// averages them (range [0, 1/4]).
enum class MseNormalization { literal, bounded };

inline MseNormalization parse_mse_normalization(const std::string& s) {
    if (s == "literal") return MseNormalization::literal;
    if (s == "bounded") return MseNormalization::bounded;
    throw ConfigError("unknown MSE normalization '" + s + "' (expected literal or bounded)");
}

namespace detail {

inline void require_exactly_balanced(const LabeledPairDataset& val, const char* who) {
    if (val.size() == 0 || val.count(0) != val.count(1)) {
        throw ConfigError(std::string(who) + ": validation set must hold the same number of points per class (" +
                          std::to_string(val.count(0)) + " vs " + std::to_string(val.count(1)) + ")");
    }
}

} // namespace detail

/// Fraction of validation points whose hard prediction I(d > 1/2) equals the label.
inline double t_acc(const ProbClassifier& clf, const LabeledPairDataset& val) {
    detail::require_exactly_balanced(val, "t_acc");
    const Vector p = clf.predict_proba(val.features());
    double correct = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        correct += hard_label(p[i]) == val.labels()[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    }
    return correct / static_cast<double>(p.size());
}

/// Per-class mean of (d - 1/2)^2 on the validation set, indexed by label.
inline std::array<double, 2> mse_terms(const ProbClassifier& clf, const LabeledPairDataset& val) {
    const Vector p = clf.predict_proba(val.features());
    std::array<double, 2> sum{0.0, 0.0};
    std::array<double, 2> n{0.0, 0.0};
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const int c = val.labels()[static_cast<std::size_t>(i)];
        sum[static_cast<std::size_t>(c)] += (p[i] - 0.5) * (p[i] - 0.5);
        n[static_cast<std::size_t>(c)] += 1.0;
    }
    return {n[0] > 0 ? sum[0] / n[0] : 0.0, n[1] > 0 ? sum[1] / n[1] : 0.0};
}

inline double t_mse(const ProbClassifier& clf, const LabeledPairDataset& val,
                    MseNormalization norm = MseNormalization::literal) {
    detail::require_exactly_balanced(val, "t_mse");
    const auto terms = mse_terms(clf, val);
    const double total = terms[0] + terms[1];
    return norm == MseNormalization::literal ? total : 0.5 * total;
}

/// Mean of (d(w) - 1/2)^2 over feature rows that all belong to class 0.
inline double t_mse0(const ProbClassifier& clf, const Matrix& features) {
    if (features.rows() < 1) {
        throw ConfigError("t_mse0: need at least one evaluation point");
    }
    const Vector p = clf.predict_proba(features);
    return (p.array() - 0.5).square().mean();
}

/// t_mse0 at one observation: rows are (theta_q_n, x_o).
inline double t_mse0(const ProbClassifier& clf, const Matrix& theta_q, const Vector& x_o) {
    return t_mse0(clf, pair_with(theta_q, x_o));
}

/// Fraction of class-0 rows predicted as class 0 (ties count as class 0).
inline double t_acc0(const ProbClassifier& clf, const Matrix& features) {
    if (features.rows() < 1) {
        throw ConfigError("t_acc0: need at least one evaluation point");
    }
    const Vector p = clf.predict_proba(features);
    return (p.array() <= 0.5).cast<double>().mean();
}

inline double t_acc0(const ProbClassifier& clf, const Matrix& theta_q, const Vector& x_o) {
    return t_acc0(clf, pair_with(theta_q, x_o));
}

/**
 * Monte Carlo p-value. Default: (1/N_H) #{t_h > t}. Conservative:
 * (1 + #{t_h >= t}) / (N_H + 1), which is never zero.
 */
inline double p_value(double statistic, std::span<const double> null_statistics, bool conservative = false) {
    if (null_statistics.empty()) {
        throw ConfigError("p_value: null distribution is empty");
    }
    double count = 0.0;
    for (double t : null_statistics) {
        count += conservative ? (t >= statistic ? 1.0 : 0.0) : (t > statistic ? 1.0 : 0.0);
    }
    const auto n = static_cast<double>(null_statistics.size());
    return conservative ? (1.0 + count) / (n + 1.0) : count / n;
}

} // namespace lc2st

#endif
