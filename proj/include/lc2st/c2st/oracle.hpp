#ifndef LC2ST_C2ST_ORACLE_HPP
#define LC2ST_C2ST_ORACLE_HPP

#include <array>
#include <string>
#include <vector>

#include "lc2st/c2st/lc2st.hpp"

namespace lc2st {

/// Statistics computed by one oracle run, each with its permutation null.
enum class OracleStatistic { acc, mse, acc0, mse0 };

inline const char* oracle_statistic_name(OracleStatistic s) {
    switch (s) {
    case OracleStatistic::acc: return "acc";
    case OracleStatistic::mse: return "mse";
    case OracleStatistic::acc0: return "acc0";
    case OracleStatistic::mse0: return "mse0";
    }
    return "?";
}

struct OracleConfig {
    ClassifierConfig classifier;
    int n_h = 100;
    MseNormalization normalization = MseNormalization::literal;
    bool conservative = false;
};

struct OracleOutcome {
    std::array<double, 4> statistic{};                 // indexed by OracleStatistic
    std::array<std::vector<double>, 4> null_statistics; // one entry per null trial
    std::array<double, 4> p_value{};                    // NaN without a null
    Eigen::Index n_train = 0;
    Eigen::Index n_v = 0;

    double stat(OracleStatistic s) const { return statistic[static_cast<std::size_t>(s)]; }
    double p(OracleStatistic s) const { return p_value[static_cast<std::size_t>(s)]; }

    TestResult as_result(OracleStatistic s, const Vector& x_o) const {
        TestResult r;
        r.method = std::string("oracle-c2st-") + oracle_statistic_name(s);
        r.x_o = x_o;
        r.statistic = stat(s);
        r.null_statistics = null_statistics[static_cast<std::size_t>(s)];
        if (!r.null_statistics.empty()) {
            r.p_value = p(s);
        }
        r.n_v = n_v;
        r.n_h = r.null_statistics.size();
        return r;
    }
};

namespace detail {

inline std::array<double, 4> oracle_statistics(const ProbClassifier& clf, const LabeledPairDataset& val,
                                               const Matrix& val_class0, MseNormalization norm) {
    return {t_acc(clf, val), t_mse(clf, val, norm), t_acc0(clf, val_class0), t_mse0(clf, val_class0)};
}

} // namespace detail

/**
 * Two-sample classifier test between estimator samples (class 0) and
 * reference samples (class 1). The classifier is fitted on the training
 * pair and all four statistics are read off a held-out balanced pair; the
 * null refits on label-permuted training data, one fresh permutation per
 * trial, and is evaluated on the same held-out pair.
 */
inline OracleOutcome oracle_c2st(const Matrix& q_train, const Matrix& p_train, const Matrix& q_val,
                                 const Matrix& p_val, const OracleConfig& cfg, RngStream rng) {
    if (q_train.rows() != p_train.rows() || q_val.rows() != p_val.rows() || q_val.rows() == 0) {
        throw ConfigError("oracle_c2st: training and validation sets must be balanced and nonempty");
    }
    const LabeledPairDataset train = LabeledPairDataset::from_classes(q_train, p_train);
    const LabeledPairDataset val = LabeledPairDataset::from_classes(q_val, p_val);
    OracleOutcome out;
    out.n_train = q_train.rows();
    out.n_v = q_val.rows();
    const ClassifierPtr main = fit_classifier(cfg.classifier, train, rng.child(1));
    out.statistic = detail::oracle_statistics(*main, val, q_val, cfg.normalization);
    std::vector<std::array<double, 4>> nulls(static_cast<std::size_t>(std::max(cfg.n_h, 0)));
    parallel_for(nulls.size(), [&](std::size_t h) {
        RngStream trial = rng.child(kNullStreamBase + h);
        RngStream perm_rng = trial.child(0);
        const ClassifierPtr clf = fit_classifier(cfg.classifier, train.with_permuted_labels(perm_rng), trial.child(1));
        nulls[h] = detail::oracle_statistics(*clf, val, q_val, cfg.normalization);
    });
    for (std::size_t s = 0; s < 4; ++s) {
        for (const auto& n : nulls) {
            out.null_statistics[s].push_back(n[s]);
        }
        out.p_value[s] = nulls.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : p_value(out.statistic[s], out.null_statistics[s], cfg.conservative);
    }
    return out;
}

/// Draws n_train + n_v points per class at x_o from the estimator and the
/// reference posterior and runs oracle_c2st.
inline OracleOutcome oracle_c2st_at(const ConditionalSampler& estimator, const ConditionalSampler& reference,
                                    const Vector& x_o, Eigen::Index n_train, Eigen::Index n_v,
                                    const OracleConfig& cfg, RngStream rng) {
    RngStream q_rng = rng.child(2);
    RngStream p_rng = rng.child(3);
    const Matrix q = estimator.sample(x_o, n_train + n_v, q_rng);
    const Matrix p = reference.sample(x_o, n_train + n_v, p_rng);
    return oracle_c2st(q.topRows(n_train), p.topRows(n_train), q.bottomRows(n_v), p.bottomRows(n_v), cfg, rng);
}

} // namespace lc2st

#endif
