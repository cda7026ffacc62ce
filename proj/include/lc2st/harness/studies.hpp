#ifndef LC2ST_HARNESS_STUDIES_HPP
#define LC2ST_HARNESS_STUDIES_HPP

#include <algorithm>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lc2st/harness/sweep.hpp"

namespace lc2st {

// ---------------------------------------------------------------------------
// Oracle correlation

struct CorrelationResult {
    std::vector<Vector> observations;
    std::vector<double> oracle;   // two-class oracle t_mse at each observation
    std::vector<double> local;    // local t_mse0 at each observation
    stats::CorrelationTest test;  // Spearman rho with permutation p-value
    Eigen::Index n_cal = 0;

    std::string to_csv() const {
        std::ostringstream out;
        out << "observation,oracle_t_mse,local_t_mse0\n";
        for (std::size_t j = 0; j < oracle.size(); ++j) {
            out << j << ',' << format_double(oracle[j]) << ',' << format_double(local[j]) << '\n';
        }
        return out.str();
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"n_observations", oracle.size()}, {"n_cal", n_cal}, {"spearman_rho", test.rho},
                              {"p_value", test.p_value},        {"oracle", oracle}, {"local", local}};
    }
};

/**
 * Per-observation pairs of (oracle t_mse, local t_mse0) for one amortized
 * local classifier trained on N_cal = n_cal[0], plus a Spearman rank test.
 */
inline CorrelationResult run_oracle_correlation(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.is_shift_task()) {
        throw PlanError("correlation study needs a task with observations");
    }
    if (plan.n_observations < 2) {
        throw PlanError("correlation needs at least 2 observations");
    }
    const auto task = make_task(plan.task, plan.task_options);
    const auto reference = task->reference_posterior();
    if (!reference) {
        throw PlanError("correlation study needs a reference posterior for task '" + plan.task + "'");
    }
    const Cell cell = plan_cells(plan).front();
    const EstimatorBundle est = make_estimator(plan, *task, cell.n_train, false);
    RngStream rng(sub_seed(plan.seed, cell.key, kAllObservations, 0), 0);
    RngStream cal_rng = rng.child(0);
    const JointDataset cal = task->sample_joint(cell.n_cal, cal_rng);
    const LabeledPairDataset data = lc2st_classification_set(*est.sampler, cal, rng.child(1));
    const ClassifierPtr local = fit_classifier(plan.classifier, data, rng.child(2));

    CorrelationResult out;
    out.n_cal = cell.n_cal;
    OracleConfig oracle_cfg = detail::oracle_config(plan);
    oracle_cfg.n_h = 0;
    out.oracle.resize(static_cast<std::size_t>(plan.n_observations));
    out.local.resize(static_cast<std::size_t>(plan.n_observations));
    for (int j = 0; j < plan.n_observations; ++j) {
        out.observations.push_back(plan_observation(plan, *task, j));
    }
    parallel_for(out.oracle.size(), [&](std::size_t j) {
        const std::uint64_t seed = sub_seed(plan.seed, cell.key, j, 0);
        const Vector& x_o = out.observations[j];
        RngStream eval_rng(seed, 1);
        out.local[j] = t_mse0(*local, est.sampler->sample(x_o, plan.n_v, eval_rng), x_o);
        out.oracle[j] = oracle_c2st_at(*est.sampler, *reference, x_o, cell.n_cal, plan.n_v, oracle_cfg,
                                       RngStream(seed, 3))
                            .stat(OracleStatistic::mse);
    });
    RngStream perm_rng(hash_seed(plan.seed, 0xc0dd), 0);
    out.test = stats::spearman_permutation_test(out.oracle, out.local,
                                                static_cast<std::size_t>(plan.n_permutations), perm_rng);
    return out;
}

// ---------------------------------------------------------------------------
// Runtime benchmark

struct BenchRow {
    std::string method;
    Eigen::Index n_train = 0;
    Eigen::Index n_cal = 0;
    std::string phase; // train | null | evaluate
    double median_seconds = 0.0;
    std::vector<double> samples;
    std::uint64_t fits = 0; // classifier fits in this phase (per repetition)
};

struct BenchResult {
    std::vector<BenchRow> rows;
    nlohmann::json machine;
    int n_observations = 0;

    const BenchRow& row(const std::string& method, Eigen::Index n_cal, const std::string& phase) const {
        for (const auto& r : rows) {
            if (r.method == method && r.n_cal == n_cal && r.phase == phase) {
                return r;
            }
        }
        throw ConfigError("no bench row for " + method + "/" + std::to_string(n_cal) + "/" + phase);
    }

    std::string to_csv() const {
        std::ostringstream out;
        out << "method,n_train,n_cal,phase,median_seconds\n";
        for (const auto& r : rows) {
            out << r.method << ',' << r.n_train << ',' << r.n_cal << ',' << r.phase << ','
                << format_double(r.median_seconds) << '\n';
        }
        return out.str();
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"machine", machine}, {"n_observations", n_observations}, {"rows", nlohmann::json::array()}};
        for (const auto& r : rows) {
            j["rows"].push_back({{"method", r.method},
                                 {"n_train", r.n_train},
                                 {"n_cal", r.n_cal},
                                 {"phase", r.phase},
                                 {"median_seconds", r.median_seconds},
                                 {"samples", r.samples},
                                 {"classifier_fits", r.fits}});
        }
        return j;
    }
};

inline nlohmann::json machine_metadata() {
    return nlohmann::json{{"hardware_threads", std::thread::hardware_concurrency()},
                          {"worker_threads", worker_count()},
#if defined(__clang__)
                          {"compiler", std::string("clang ") + __clang_version__},
#elif defined(__GNUC__)
                          {"compiler", std::string("gcc ") + __VERSION__},
#else
                          {"compiler", "unknown"},
#endif
#ifdef NDEBUG
                          {"optimized", true},
#else
                          {"optimized", false},
#endif
                          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                        "." + std::to_string(EIGEN_MINOR_VERSION)}};
}

/**
 * Wall-clock per method, cell and phase (train / null / evaluate), median
 * over plan.repetitions. Evaluation covers all plan observations. The NF
 * null is fitted once per calibration set, whatever the observation count.
 */
inline BenchResult run_runtime_bench(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.is_shift_task()) {
        throw PlanError("bench needs a task with observations");
    }
    const auto task = make_task(plan.task, plan.task_options);
    BenchResult out;
    out.machine = machine_metadata();
    out.n_observations = plan.n_observations;
    std::vector<Vector> observations;
    for (int j = 0; j < plan.n_observations; ++j) {
        observations.push_back(plan_observation(plan, *task, j));
    }
    const auto reference = task->reference_posterior();
    std::map<Eigen::Index, EstimatorBundle> estimators;

    for (const auto& method : plan.methods) {
        for (const Cell& cell : plan_cells(plan)) {
            if (!estimators.count(cell.n_train)) {
                estimators[cell.n_train] = make_estimator(plan, *task, cell.n_train, false);
            }
            const EstimatorBundle& est = estimators.at(cell.n_train);
            std::array<std::vector<double>, 3> samples;
            std::array<std::uint64_t, 3> fits{0, 0, 0};
            for (int rep = 0; rep < plan.repetitions; ++rep) {
                RngStream rng(sub_seed(plan.seed, cell.key, kAllObservations, static_cast<std::uint64_t>(rep)), 9);
                RngStream cal_rng = rng.child(0);
                const JointDataset cal = task->sample_joint(cell.n_cal, cal_rng);
                std::array<double, 3> t{0.0, 0.0, 0.0};
                std::array<std::uint64_t, 3> f{0, 0, 0};
                const auto timed = [&](int phase, auto&& fn) {
                    if (phase == 1 && plan.n_h == 0) {
                        return;
                    }
                    const std::uint64_t before = fit_counter().load();
                    const auto t0 = std::chrono::steady_clock::now();
                    fn();
                    t[static_cast<std::size_t>(phase)] += seconds_since(t0);
                    f[static_cast<std::size_t>(phase)] += fit_counter().load() - before;
                };
                if (method == "lc2st") {
                    std::optional<LabeledPairDataset> data;
                    ClassifierPtr main;
                    NullEnsemble null;
                    timed(0, [&] {
                        data = lc2st_classification_set(*est.sampler, cal, rng.child(1));
                        main = fit_classifier(plan.classifier, *data, rng.child(2));
                    });
                    timed(1, [&] { null = lc2st_permutation_null(*data, plan.classifier, plan.n_h, rng.child(3)); });
                    timed(2, [&] {
                        for (std::size_t j = 0; j < observations.size(); ++j) {
                            lc2st_evaluate(*main, null, *est.sampler, observations[j], plan.n_v, rng.child(100 + j));
                        }
                    });
                } else if (method == "lc2st-nf") {
                    if (!est.flow) {
                        throw PlanError("lc2st-nf bench needs a flow estimator");
                    }
                    TrainedTest trained;
                    NullEnsemble null;
                    timed(0, [&] { trained = lc2st_nf_train(*est.flow, cal, plan.classifier, rng.child(4)); });
                    if (plan.n_h > 0) {
                        timed(1, [&] {
                            null = lc2st_nf_null(cal.xs(), task->theta_dim(), plan.classifier, plan.n_h, rng.child(5));
                        });
                    }
                    timed(2, [&] {
                        for (std::size_t j = 0; j < observations.size(); ++j) {
                            lc2st_nf_evaluate(*trained.classifier, null, task->theta_dim(), observations[j], plan.n_v,
                                              rng.child(100 + j));
                        }
                    });
                } else {
                    if (!reference) {
                        throw PlanError("oracle bench needs a reference posterior");
                    }
                    const OracleStatistic stat = oracle_statistic_of(method);
                    for (std::size_t j = 0; j < observations.size(); ++j) {
                        RngStream orng = rng.child(100 + j);
                        RngStream q_rng = orng.child(2);
                        RngStream p_rng = orng.child(3);
                        const Matrix q = est.sampler->sample(observations[j], cell.n_cal + plan.n_v, q_rng);
                        const Matrix p = reference->sample(observations[j], cell.n_cal + plan.n_v, p_rng);
                        const LabeledPairDataset train =
                            LabeledPairDataset::from_classes(q.topRows(cell.n_cal), p.topRows(cell.n_cal));
                        const LabeledPairDataset val =
                            LabeledPairDataset::from_classes(q.bottomRows(plan.n_v), p.bottomRows(plan.n_v));
                        const Matrix q_val = q.bottomRows(plan.n_v);
                        ClassifierPtr main;
                        NullEnsemble null;
                        timed(0, [&] { main = fit_classifier(plan.classifier, train, orng.child(1)); });
                        timed(1, [&] { null = lc2st_permutation_null(train, plan.classifier, plan.n_h, orng); });
                        timed(2, [&] {
                            const auto stat_of = [&](const ProbClassifier& c) {
                                return detail::oracle_statistics(c, val, q_val,
                                                                 plan.normalization)[static_cast<std::size_t>(stat)];
                            };
                            std::vector<double> nulls;
                            const double s = stat_of(*main);
                            for (const auto& c : null.classifiers) {
                                nulls.push_back(stat_of(*c));
                            }
                            if (!nulls.empty()) {
                                p_value(s, nulls, plan.conservative);
                            }
                        });
                    }
                }
                for (std::size_t ph = 0; ph < 3; ++ph) {
                    samples[ph].push_back(t[ph]);
                    fits[ph] = f[ph];
                }
            }
            static const char* phases[] = {"train", "null", "evaluate"};
            for (std::size_t ph = 0; ph < 3; ++ph) {
                out.rows.push_back(BenchRow{method, cell.n_train, cell.n_cal, phases[ph],
                                            stats::median(samples[ph]), samples[ph], fits[ph]});
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// NF null amortization

struct AmortizationResult {
    std::vector<std::string> flow_names;
    std::vector<std::vector<double>> p_values; // per flow, over runs x observations
    std::vector<double> rejection_rate;        // per flow
    std::vector<double> ks_p;                  // per flow
    std::uint64_t null_fits = 0;               // fits made while building null ensembles
    std::uint64_t expected_null_fits = 0;      // n_runs * N_H
    std::uint64_t additional_null_fits = 0;    // fits beyond main classifiers after the null was built
    double null_seconds = 0.0;                 // total wall-clock spent building null ensembles
    double additional_null_seconds = 0.0;      // additional_null_fits at the measured per-fit null cost
    double evaluate_seconds = 0.0;

    nlohmann::json to_json() const {
        return nlohmann::json{{"flows", flow_names},
                              {"rejection_rate", rejection_rate},
                              {"ks_p", ks_p},
                              {"null_fits", null_fits},
                              {"expected_null_fits", expected_null_fits},
                              {"additional_null_fits", additional_null_fits},
                              {"null_seconds", null_seconds},
                              {"additional_null_seconds", additional_null_seconds},
                              {"evaluate_seconds", evaluate_seconds},
                              {"p_values", p_values}};
    }
};

/**
 * One NF null ensemble per calibration set, reused for an exact flow and a
 * scale-distorted flow at every observation. Counts classifier fits to show
 * that no null classifier is trained after the ensemble exists.
 */
inline AmortizationResult run_nf_amortization(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.task != "gaussian_conjugate") {
        throw PlanError("amortization study uses the exact flows of gaussian_conjugate");
    }
    if (plan.n_h < 1) {
        throw PlanError("amortization study needs N_H >= 1");
    }
    const auto task = make_task(plan.task, plan.task_options);
    const Cell cell = plan_cells(plan).front();
    const double distorted_scale = plan.estimator.kind == "distortion" && plan.estimator.scale != 1.0
                                       ? plan.estimator.scale
                                       : 2.0;
    const std::vector<std::shared_ptr<const ConditionalFlow>> flows{
        conjugate_flow(plan, *task, {}, 1.0), conjugate_flow(plan, *task, {}, distorted_scale)};
    AmortizationResult out;
    out.flow_names = {"exact", "scale_" + format_double(distorted_scale)};
    out.p_values.resize(flows.size());
    std::vector<Vector> observations;
    for (int j = 0; j < plan.n_observations; ++j) {
        observations.push_back(plan_observation(plan, *task, j));
    }
    for (int run = 0; run < plan.n_runs; ++run) {
        RngStream rng(sub_seed(plan.seed, cell.key, kAllObservations, static_cast<std::uint64_t>(run)), 0);
        RngStream cal_rng = rng.child(0);
        const JointDataset cal = task->sample_joint(cell.n_cal, cal_rng);

        std::uint64_t before = fit_counter().load();
        auto t0 = std::chrono::steady_clock::now();
        const NullEnsemble null = lc2st_nf_null(cal.xs(), task->theta_dim(), plan.classifier, plan.n_h, rng.child(5));
        out.null_seconds += seconds_since(t0);
        out.null_fits += fit_counter().load() - before;

        before = fit_counter().load();
        t0 = std::chrono::steady_clock::now();
        std::uint64_t main_fits = 0;
        for (std::size_t f = 0; f < flows.size(); ++f) {
            const TrainedTest trained = lc2st_nf_train(*flows[f], cal, plan.classifier, rng.child(10 + f));
            ++main_fits;
            for (std::size_t j = 0; j < observations.size(); ++j) {
                const std::uint64_t seed = sub_seed(plan.seed, cell.key, j, static_cast<std::uint64_t>(run));
                const TestResult r = lc2st_nf_evaluate(*trained.classifier, null, task->theta_dim(), observations[j],
                                                       plan.n_v, RngStream(seed, 20 + f), plan.conservative);
                out.p_values[f].push_back(*r.p_value);
            }
        }
        out.evaluate_seconds += seconds_since(t0);
        out.additional_null_fits += fit_counter().load() - before - main_fits;
    }
    out.expected_null_fits = static_cast<std::uint64_t>(plan.n_runs) * static_cast<std::uint64_t>(plan.n_h);
    out.additional_null_seconds = static_cast<double>(out.additional_null_fits) * out.null_seconds /
                                  static_cast<double>(std::max<std::uint64_t>(1, out.null_fits));
    for (const auto& ps : out.p_values) {
        double rejected = 0.0;
        for (double p : ps) {
            rejected += p < plan.alpha ? 1.0 : 0.0;
        }
        out.rejection_rate.push_back(rejected / static_cast<double>(ps.size()));
        out.ks_p.push_back(stats::ks_uniform(ps).p_value);
    }
    return out;
}

} // namespace lc2st

#endif
