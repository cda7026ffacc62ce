#ifndef LC2ST_C2ST_LC2ST_HPP
#define LC2ST_C2ST_LC2ST_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "lc2st/c2st/result.hpp"
#include "lc2st/c2st/statistics.hpp"
#include "lc2st/core/parallel.hpp"
#include "lc2st/flows/flow.hpp"
#include "lc2st/tasks/task.hpp"

namespace lc2st {

/// Null trial h is fitted from stream child(kNullStreamBase + h).
inline constexpr std::uint64_t kNullStreamBase = 1000;

struct TrainedTest {
    ClassifierPtr classifier;
    NullEnsemble null;
    LabeledPairDataset data; // the classification set the main classifier saw
};

namespace detail {

inline NullEnsemble fit_null_ensemble(int n_h, const char* provenance, Eigen::Index n_cal,
                                      const RngStream& rng,
                                      const std::function<ClassifierPtr(RngStream&)>& fit_trial) {
    if (n_h < 0) {
        throw ConfigError("null ensemble size must be nonnegative");
    }
    NullEnsemble e;
    e.provenance = provenance;
    e.seed = hash_seed(rng.seed(), rng.stream_id());
    e.n_cal = n_cal;
    e.classifiers.resize(static_cast<std::size_t>(n_h));
    for (int h = 0; h < n_h; ++h) {
        e.stream_ids.push_back(kNullStreamBase + static_cast<std::uint64_t>(h));
    }
    parallel_for(static_cast<std::size_t>(n_h), [&](std::size_t h) {
        RngStream trial = rng.child(e.stream_ids[h]);
        e.classifiers[h] = fit_trial(trial);
    });
    return e;
}

inline TestResult evaluate_mse0(const char* method, const ProbClassifier& main, const NullEnsemble& null,
                                const Matrix& features, const Vector& x_o, bool conservative) {
    TestResult r;
    r.method = method;
    r.x_o = x_o;
    r.n_v = features.rows();
    r.n_h = null.size();
    r.statistic = t_mse0(main, features);
    r.null_statistics.resize(null.size());
    parallel_for(null.size(), [&](std::size_t h) { r.null_statistics[h] = t_mse0(*null.classifiers[h], features); });
    if (!null.empty()) {
        r.p_value = p_value(r.statistic, r.null_statistics, conservative);
    }
    return r;
}

} // namespace detail

/// Classification set of the local test: class 0 pairs an estimator draw
/// theta_q ~ q(. | X_n) with X_n, class 1 the true (Theta_n, X_n).
inline LabeledPairDataset lc2st_classification_set(const ConditionalSampler& estimator, const JointDataset& cal,
                                                   RngStream rng) {
    if (cal.size() == 0) {
        throw ConfigError("lc2st: calibration set is empty");
    }
    if (estimator.theta_dim() != cal.theta_dim()) {
        throw ConfigError("lc2st: estimator and calibration set disagree on theta dimension");
    }
    const Matrix theta_q = estimator.sample_each(cal.xs(), rng);
    for (Eigen::Index i = 0; i < theta_q.rows(); ++i) {
        if (!all_finite(theta_q.row(i))) {
            throw SamplingError("estimator returned a non-finite draw", static_cast<long>(i));
        }
    }
    return LabeledPairDataset::from_classes(hconcat(theta_q, cal.xs()), hconcat(cal.thetas(), cal.xs()));
}

/// Permutation null: refits on `data` with labels re-permuted independently
/// for each trial. The permutation swaps labels within each (theta_q, X_n),
/// (Theta_n, X_n) pair, so both classes keep every X_n once, as in the main
/// classification set. A full shuffle would split the shared observations
/// unevenly between the classes and inflate the null statistics.
inline NullEnsemble lc2st_permutation_null(const LabeledPairDataset& data, const ClassifierConfig& clf, int n_h,
                                           RngStream rng) {
    return detail::fit_null_ensemble(n_h, "permutation", data.size() / 2, rng, [&](RngStream& trial) {
        RngStream perm_rng = trial.child(0);
        return fit_classifier(clf, data.with_pair_swapped_labels(perm_rng), trial.child(1));
    });
}

/// Trains the main classifier and its permutation null on a calibration set.
inline TrainedTest lc2st_train(const ConditionalSampler& estimator, const JointDataset& cal,
                               const ClassifierConfig& clf, int n_h, RngStream rng) {
    LabeledPairDataset data = lc2st_classification_set(estimator, cal, rng.child(0));
    ClassifierPtr main = fit_classifier(clf, data, rng.child(1));
    NullEnsemble null = lc2st_permutation_null(data, clf, n_h, rng);
    return {std::move(main), std::move(null), std::move(data)};
}

/// Statistic and p-value at one observation from fresh estimator draws shared
/// by the main and every null classifier.
inline TestResult lc2st_evaluate(const ProbClassifier& main, const NullEnsemble& null,
                                 const ConditionalSampler& estimator, const Vector& x_o, Eigen::Index n_v,
                                 RngStream rng, bool conservative = false) {
    if (n_v < 1) {
        throw ConfigError("lc2st_evaluate: N_v must be positive");
    }
    const Matrix theta_q = estimator.sample(x_o, n_v, rng);
    return detail::evaluate_mse0("lc2st", main, null, pair_with(theta_q, x_o), x_o, conservative);
}

/// Latents T^{-1}(Theta_n; X_n); a failing row is reported by index.
inline Matrix flow_latents(const ConditionalFlow& flow, const JointDataset& cal) {
    try {
        return flow.inverse(cal.thetas(), cal.xs()).values;
    } catch (const NumericError& e) {
        for (Eigen::Index i = 0; i < cal.size(); ++i) {
            try {
                flow.inverse(Matrix(cal.thetas().row(i)), Matrix(cal.xs().row(i)));
            } catch (const NumericError& row_error) {
                throw NumericError(std::string(row_error.what()) + " (calibration row " + std::to_string(i) + ")");
            }
        }
        throw;
    }
}

/**
 * Flow-specific training: class 0 pairs fresh Z_n ~ N(0, I) with X_n, class
 * 1 pairs the inverse-mapped T^{-1}(Theta_n; X_n) with X_n.
 */
inline TrainedTest lc2st_nf_train(const ConditionalFlow& flow, const JointDataset& cal, const ClassifierConfig& clf,
                                  RngStream rng) {
    if (cal.size() == 0) {
        throw ConfigError("lc2st_nf_train: calibration set is empty");
    }
    if (flow.theta_dim() != cal.theta_dim() || flow.x_dim() != cal.x_dim()) {
        throw ConfigError("lc2st_nf_train: flow and calibration set dimensions differ");
    }
    const Matrix z_q = flow_latents(flow, cal);
    RngStream base_rng = rng.child(0);
    const Matrix z = base_rng.normal_matrix(cal.size(), cal.theta_dim());
    LabeledPairDataset data = LabeledPairDataset::from_classes(hconcat(z, cal.xs()), hconcat(z_q, cal.xs()));
    ClassifierPtr main = fit_classifier(clf, data, rng.child(1));
    return {std::move(main), NullEnsemble{}, std::move(data)};
}

/**
 * Estimator-independent null: in each trial both classes are fresh N(0, I)
 * draws paired with the calibration observations. Reusable for any flow and
 * any observation sharing those observations.
 */
inline NullEnsemble lc2st_nf_null(const Matrix& cal_xs, int theta_dim, const ClassifierConfig& clf, int n_h,
                                  RngStream rng) {
    if (n_h < 1) {
        throw ConfigError("lc2st_nf_null: N_H must be at least 1");
    }
    if (cal_xs.rows() == 0 || theta_dim < 1) {
        throw ConfigError("lc2st_nf_null: need calibration observations and a positive theta dimension");
    }
    return detail::fit_null_ensemble(n_h, "nf-resampled", cal_xs.rows(), rng, [&](RngStream& trial) {
        RngStream r0 = trial.child(0);
        RngStream r1 = trial.child(1);
        const Matrix z0 = r0.normal_matrix(cal_xs.rows(), theta_dim);
        const Matrix z1 = r1.normal_matrix(cal_xs.rows(), theta_dim);
        return fit_classifier(clf, LabeledPairDataset::from_classes(hconcat(z0, cal_xs), hconcat(z1, cal_xs)),
                              trial.child(2));
    });
}

/// Statistic on fresh Z_n ~ N(0, I) paired with x_o; p-value from the
/// precomputed null ensemble.
inline TestResult lc2st_nf_evaluate(const ProbClassifier& main, const NullEnsemble& null, int theta_dim,
                                    const Vector& x_o, Eigen::Index n_v, RngStream rng, bool conservative = false) {
    if (n_v < 1) {
        throw ConfigError("lc2st_nf_evaluate: N_v must be positive");
    }
    const Matrix z = rng.normal_matrix(n_v, theta_dim);
    return detail::evaluate_mse0("lc2st-nf", main, null, pair_with(z, x_o), x_o, conservative);
}

} // namespace lc2st

#endif
