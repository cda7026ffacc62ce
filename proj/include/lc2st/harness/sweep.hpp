#ifndef LC2ST_HARNESS_SWEEP_HPP
#define LC2ST_HARNESS_SWEEP_HPP

#include <chrono>
#include <cstring>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lc2st/c2st/lc2st.hpp"
#include "lc2st/c2st/oracle.hpp"
#include "lc2st/core/stats.hpp"
#include "lc2st/harness/plan.hpp"
#include "lc2st/tasks/distort.hpp"
#include "lc2st/tasks/gaussian.hpp"

namespace lc2st {

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline std::uint64_t double_bits(double v) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &v, sizeof(bits));
    return bits;
}

/// Observation index used for seeds shared by all observations of a run.
inline constexpr std::uint64_t kAllObservations = ~std::uint64_t{0};

/// Sub-seed of one (cell, observation, run).
inline std::uint64_t sub_seed(std::uint64_t master, std::uint64_t cell_key, std::uint64_t observation,
                              std::uint64_t run) {
    return hash_seed(master, cell_key, observation, run);
}

struct Cell {
    std::size_t index = 0;
    std::uint64_t key = 0; // derived from the cell's values, not its position
    std::optional<double> sigma;
    Eigen::Index n_train = 0;
    Eigen::Index n_cal = 0;
};

inline std::vector<Cell> plan_cells(const ExperimentPlan& plan) {
    std::vector<Cell> cells;
    if (plan.is_shift_task()) {
        for (double s : plan.sigma) {
            Cell c;
            c.index = cells.size();
            c.sigma = s;
            c.n_train = plan.n_train.front();
            c.n_cal = plan.n_cal.front();
            c.key = hash_seed(0x5167a, double_bits(s), static_cast<std::uint64_t>(c.n_cal));
            cells.push_back(c);
        }
        return cells;
    }
    for (auto nt : plan.n_train) {
        for (auto nc : plan.n_cal) {
            Cell c;
            c.index = cells.size();
            c.n_train = nt;
            c.n_cal = nc;
            c.key = hash_seed(static_cast<std::uint64_t>(nt), static_cast<std::uint64_t>(nc));
            cells.push_back(c);
        }
    }
    return cells;
}

/// Observation j of a plan: x_o = Simulator(theta_o) with a seeded prior draw.
inline Vector plan_observation(const ExperimentPlan& plan, const Task& task, int j) {
    return task.observation(hash_seed(plan.seed, 0x0b5e, static_cast<std::uint64_t>(j)));
}

/// The estimator under test in the two forms the methods consume.
struct EstimatorBundle {
    std::shared_ptr<const ConditionalSampler> sampler; // lc2st and oracle methods
    std::shared_ptr<const ConditionalFlow> flow;       // lc2st-nf; null when unavailable
};

/// Exact affine flow matching a (possibly distorted) conjugate posterior.
inline std::shared_ptr<const ConditionalFlow> conjugate_flow(const ExperimentPlan& plan, const Task& task,
                                                             const std::vector<double>& shift, double scale) {
    if (task.name() != "gaussian_conjugate") {
        return nullptr;
    }
    const int m = task.theta_dim();
    const double s2 = plan.task_options.noise_std * plan.task_options.noise_std;
    Vector b = Vector::Zero(m);
    for (std::size_t i = 0; i < shift.size() && static_cast<int>(i) < m; ++i) {
        b[static_cast<Eigen::Index>(i)] = shift[i];
    }
    const Matrix A = Matrix::Identity(m, m) / (1.0 + s2);
    return std::make_shared<ConditionalFlow>(
        make_affine_flow(A, b, Vector::Constant(m, std::log(scale * std::sqrt(s2 / (1.0 + s2))))));
}

/// Trains (or loads) an NPE flow for one N_train value.
inline std::shared_ptr<const ConditionalFlow> npe_flow(const ExperimentPlan& plan, const Task& task,
                                                       Eigen::Index n_train) {
    if (!plan.estimator.flow_path.empty()) {
        return std::make_shared<ConditionalFlow>(ConditionalFlow::from_json(read_json_file(plan.estimator.flow_path)));
    }
    const std::uint64_t seed = hash_seed(plan.seed, 0x4e5045, static_cast<std::uint64_t>(n_train));
    RngStream data_rng(seed, 0);
    const JointDataset train = task.sample_joint(n_train, data_rng);
    ConditionalFlow flow = build_flow(task.theta_dim(), task.x_dim(), plan.estimator.flow, RngStream(seed, 1), &train);
    return std::make_shared<ConditionalFlow>(fit_npe(std::move(flow), train, plan.estimator.npe, RngStream(seed, 2)).flow);
}

inline EstimatorBundle make_estimator(const ExperimentPlan& plan, const Task& task, Eigen::Index n_train,
                                      bool force_reference) {
    const EstimatorSpec& spec = plan.estimator;
    const auto reference = task.reference_posterior();
    EstimatorBundle out;
    if (force_reference || spec.kind == "reference") {
        if (!reference) {
            throw PlanError("task '" + task.name() + "' has no reference posterior");
        }
        out.sampler = reference;
        out.flow = conjugate_flow(plan, task, {}, 1.0);
        return out;
    }
    if (spec.kind == "distortion") {
        if (!reference) {
            throw PlanError("distortion estimator needs a reference posterior for task '" + task.name() + "'");
        }
        Vector shift = Vector::Zero(task.theta_dim());
        if (spec.shift.size() == 1) {
            shift.setConstant(spec.shift[0]);
        } else if (!spec.shift.empty()) {
            if (static_cast<int>(spec.shift.size()) != task.theta_dim()) {
                throw PlanError("estimator shift length does not match theta dimension");
            }
            shift = Eigen::Map<const Vector>(spec.shift.data(), static_cast<Eigen::Index>(spec.shift.size()));
        }
        if (spec.scale_slope == 0.0) {
            out.sampler = distort(reference, shift, spec.scale);
            out.flow = conjugate_flow(plan, task, std::vector<double>(shift.data(), shift.data() + shift.size()),
                                      spec.scale);
        } else {
            const double base = spec.scale;
            const double slope = spec.scale_slope;
            out.sampler = std::make_shared<DistortedPosterior>(
                reference, shift, [base, slope](const Vector& x) { return base + slope * std::abs(x[0]); });
        }
        return out;
    }
    out.flow = npe_flow(plan, task, n_train);
    out.sampler = out.flow;
    return out;
}

struct RunRecord {
    std::size_t cell = 0;
    std::string method;
    std::size_t observation = 0;
    std::size_t run = 0;
    std::uint64_t seed = 0;
    TestResult result;
};

struct PhaseTimes {
    double train = 0.0;
    double null = 0.0;
    double evaluate = 0.0;

    PhaseTimes& operator+=(const PhaseTimes& o) {
        train += o.train;
        null += o.null;
        evaluate += o.evaluate;
        return *this;
    }
};

struct CellSummary {
    Cell cell;
    std::string method;
    int n_runs = 0;
    std::size_t n_tests = 0;
    std::size_t rejections = 0;
    double rate = 0.0;
    double se = 0.0;
    double ks_p = 1.0; // uniformity of the p-values
    bool small_sample = false;
};

struct MonotonicityCheck {
    std::string method;
    Eigen::Index n_train = 0;
    std::vector<Eigen::Index> n_cal;
    std::vector<double> rate;
    bool nondecreasing = true; // within one standard error
};

struct SweepResult {
    std::string study;
    ExperimentPlan plan;
    std::vector<Cell> cells;
    std::vector<RunRecord> records;
    std::vector<CellSummary> summaries;
    std::vector<MonotonicityCheck> monotonicity;
    std::vector<PhaseTimes> timing; // per cell, wall-clock; kept out of to_json

    const CellSummary& summary(std::size_t cell, const std::string& method) const {
        for (const auto& s : summaries) {
            if (s.cell.index == cell && s.method == method) {
                return s;
            }
        }
        throw ConfigError("no summary for cell " + std::to_string(cell) + " and method " + method);
    }

    nlohmann::json to_json() const {
        nlohmann::json j{{"study", study}, {"plan", plan}};
        j["summaries"] = nlohmann::json::array();
        for (const auto& s : summaries) {
            nlohmann::json sj{{"cell", s.cell.index}, {"method", s.method},       {"n_train", s.cell.n_train},
                              {"n_cal", s.cell.n_cal}, {"n_runs", s.n_runs},       {"n_tests", s.n_tests},
                              {"rejections", s.rejections}, {"rate", s.rate}, {"se", s.se},
                              {"ks_p", s.ks_p},        {"small_sample_warning", s.small_sample}};
            if (s.cell.sigma) {
                sj["sigma"] = *s.cell.sigma;
            }
            j["summaries"].push_back(sj);
        }
        j["monotonicity"] = nlohmann::json::array();
        for (const auto& m : monotonicity) {
            j["monotonicity"].push_back({{"method", m.method},
                                         {"n_train", m.n_train},
                                         {"n_cal", m.n_cal},
                                         {"rate", m.rate},
                                         {"nondecreasing_within_se", m.nondecreasing}});
        }
        j["records"] = nlohmann::json::array();
        for (const auto& r : records) {
            j["records"].push_back({{"cell", r.cell},
                                    {"method", r.method},
                                    {"observation", r.observation},
                                    {"run", r.run},
                                    {"seed", r.seed},
                                    {"result", r.result.to_json()}});
        }
        return j;
    }

    nlohmann::json timing_json() const {
        nlohmann::json j = nlohmann::json::array();
        for (std::size_t c = 0; c < timing.size(); ++c) {
            j.push_back({{"cell", c},
                         {"train_seconds", timing[c].train},
                         {"null_seconds", timing[c].null},
                         {"evaluate_seconds", timing[c].evaluate}});
        }
        return j;
    }

    /// Rates for one method: `sigma,n_runs,tpr,se` on the shift task,
    /// otherwise `n_train,n_cal,n_runs,tpr,se`. Type-I tables name the rate
    /// column `rejection_rate` and add the p-value uniformity check.
    std::string rates_csv(const std::string& method) const {
        const bool type1 = study == "type1";
        const char* rate_col = type1 ? "rejection_rate" : "tpr";
        std::ostringstream out;
        if (plan.is_shift_task()) {
            out << "sigma,n_runs," << rate_col << ",se" << (type1 ? ",ks_p" : "") << '\n';
        } else {
            out << "n_train,n_cal,n_runs," << rate_col << ",se" << (type1 ? ",ks_p" : "") << '\n';
        }
        for (const auto& s : summaries) {
            if (s.method != method) {
                continue;
            }
            if (plan.is_shift_task()) {
                out << format_double(*s.cell.sigma);
            } else {
                out << s.cell.n_train << ',' << s.cell.n_cal;
            }
            out << ',' << s.n_runs << ',' << format_double(s.rate) << ',' << format_double(s.se);
            if (type1) {
                out << ',' << format_double(s.ks_p);
            }
            out << '\n';
        }
        return out.str();
    }
};

/// Rejection rate I(p < alpha) per (cell, method) from raw records, with
/// SE = sqrt(r (1 - r) / n) over the n tests of the cell.
inline std::vector<CellSummary> aggregate(const std::vector<Cell>& cells, const std::vector<std::string>& methods,
                                          const std::vector<RunRecord>& records, double alpha, int n_runs) {
    std::vector<CellSummary> out;
    for (const auto& cell : cells) {
        for (const auto& method : methods) {
            CellSummary s;
            s.cell = cell;
            s.method = method;
            s.n_runs = n_runs;
            std::vector<double> ps;
            for (const auto& r : records) {
                if (r.cell != cell.index || r.method != method) {
                    continue;
                }
                ++s.n_tests;
                if (r.result.rejected(alpha)) {
                    ++s.rejections;
                }
                if (r.result.p_value) {
                    ps.push_back(*r.result.p_value);
                }
            }
            if (s.n_tests > 0) {
                s.rate = static_cast<double>(s.rejections) / static_cast<double>(s.n_tests);
                s.se = std::sqrt(s.rate * (1.0 - s.rate) / static_cast<double>(s.n_tests));
            }
            s.small_sample = n_runs < 2;
            if (s.small_sample) {
                s.se = 0.0;
            }
            if (!ps.empty()) {
                s.ks_p = stats::ks_uniform(ps).p_value;
            }
            out.push_back(s);
        }
    }
    return out;
}

/// Along N_cal (per method and N_train), each rate must be at least the
/// previous one minus the larger of their standard errors.
inline std::vector<MonotonicityCheck> monotonicity_report(const std::vector<CellSummary>& summaries,
                                                          const ExperimentPlan& plan) {
    std::vector<MonotonicityCheck> out;
    if (plan.is_shift_task()) {
        return out;
    }
    for (const auto& method : plan.methods) {
        for (auto nt : plan.n_train) {
            std::vector<const CellSummary*> row;
            for (const auto& s : summaries) {
                if (s.method == method && s.cell.n_train == nt) {
                    row.push_back(&s);
                }
            }
            std::sort(row.begin(), row.end(),
                      [](const CellSummary* a, const CellSummary* b) { return a->cell.n_cal < b->cell.n_cal; });
            MonotonicityCheck m;
            m.method = method;
            m.n_train = nt;
            for (std::size_t i = 0; i < row.size(); ++i) {
                m.n_cal.push_back(row[i]->cell.n_cal);
                m.rate.push_back(row[i]->rate);
                if (i > 0 && row[i]->rate < row[i - 1]->rate - std::max(row[i]->se, row[i - 1]->se)) {
                    m.nondecreasing = false;
                }
            }
            out.push_back(m);
        }
    }
    return out;
}

namespace detail {

struct JobOutput {
    std::vector<RunRecord> records;
    PhaseTimes times;
};

inline OracleConfig oracle_config(const ExperimentPlan& plan) {
    OracleConfig cfg;
    cfg.classifier = plan.classifier;
    cfg.n_h = plan.n_h;
    cfg.normalization = plan.normalization;
    cfg.conservative = plan.conservative;
    return cfg;
}

inline void push_oracle_records(JobOutput& out, const ExperimentPlan& plan, const Cell& cell, std::size_t obs,
                                std::size_t run, std::uint64_t seed, const OracleOutcome& outcome, const Vector& x_o) {
    for (const auto& method : plan.methods) {
        if (!is_oracle_method(method)) {
            continue;
        }
        RunRecord rec{cell.index, method, obs, run, seed, outcome.as_result(oracle_statistic_of(method), x_o)};
        rec.result.seeds = {{"master", plan.seed}, {"sub_seed", seed}};
        out.records.push_back(std::move(rec));
    }
}

/// One sigma-sweep run: fresh p and q samples at one sigma.
inline JobOutput shift_job(const ExperimentPlan& plan, const Cell& cell, std::size_t run) {
    JobOutput out;
    const std::uint64_t seed = sub_seed(plan.seed, cell.key, 0, run);
    RngStream rng(seed, 0);
    const GaussianShiftPair pair{*cell.sigma, plan.dim};
    const auto t0 = std::chrono::steady_clock::now();
    RngStream train_rng = rng.child(10);
    RngStream val_rng = rng.child(11);
    const auto [p_train, q_train] = gaussian_shift_samples(pair, cell.n_cal, train_rng);
    const auto [p_val, q_val] = gaussian_shift_samples(pair, plan.n_v, val_rng);
    const OracleOutcome outcome = oracle_c2st(q_train, p_train, q_val, p_val, oracle_config(plan), rng);
    out.times.train += seconds_since(t0);
    push_oracle_records(out, plan, cell, 0, run, seed, outcome, Vector());
    return out;
}

/// One run of the amortized local tests: train on a fresh calibration set,
/// then evaluate at every observation.
inline JobOutput local_job(const ExperimentPlan& plan, const Task& task, const EstimatorBundle& est,
                           const std::vector<Vector>& observations, const Cell& cell, std::size_t run) {
    JobOutput out;
    const std::uint64_t run_seed = sub_seed(plan.seed, cell.key, kAllObservations, run);
    RngStream rng(run_seed, 0);
    RngStream cal_rng = rng.child(0);
    const JointDataset cal = task.sample_joint(cell.n_cal, cal_rng);
    for (const auto& method : plan.methods) {
        if (method == "lc2st") {
            auto t0 = std::chrono::steady_clock::now();
            const LabeledPairDataset data = lc2st_classification_set(*est.sampler, cal, rng.child(1));
            const ClassifierPtr main = fit_classifier(plan.classifier, data, rng.child(2));
            out.times.train += seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            const NullEnsemble null = lc2st_permutation_null(data, plan.classifier, plan.n_h, rng.child(3));
            out.times.null += seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            for (std::size_t j = 0; j < observations.size(); ++j) {
                const std::uint64_t seed = sub_seed(plan.seed, cell.key, j, run);
                RunRecord rec{cell.index, method, j, run, seed,
                              lc2st_evaluate(*main, null, *est.sampler, observations[j], plan.n_v, RngStream(seed, 1),
                                             plan.conservative)};
                rec.result.seeds = {{"master", plan.seed}, {"run_seed", run_seed}, {"sub_seed", seed}};
                out.records.push_back(std::move(rec));
            }
            out.times.evaluate += seconds_since(t0);
        } else if (method == "lc2st-nf") {
            if (!est.flow) {
                throw PlanError("lc2st-nf needs a flow estimator (or an analytic one on gaussian_conjugate)");
            }
            auto t0 = std::chrono::steady_clock::now();
            const TrainedTest trained = lc2st_nf_train(*est.flow, cal, plan.classifier, rng.child(4));
            out.times.train += seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            const NullEnsemble null =
                plan.n_h > 0 ? lc2st_nf_null(cal.xs(), task.theta_dim(), plan.classifier, plan.n_h, rng.child(5))
                             : NullEnsemble{};
            out.times.null += seconds_since(t0);
            t0 = std::chrono::steady_clock::now();
            for (std::size_t j = 0; j < observations.size(); ++j) {
                const std::uint64_t seed = sub_seed(plan.seed, cell.key, j, run);
                RunRecord rec{cell.index, method, j, run, seed,
                              lc2st_nf_evaluate(*trained.classifier, null, task.theta_dim(), observations[j],
                                                plan.n_v, RngStream(seed, 2), plan.conservative)};
                rec.result.seeds = {{"master", plan.seed}, {"run_seed", run_seed}, {"sub_seed", seed}};
                out.records.push_back(std::move(rec));
            }
            out.times.evaluate += seconds_since(t0);
        }
    }
    bool any_oracle = false;
    for (const auto& method : plan.methods) {
        any_oracle = any_oracle || is_oracle_method(method);
    }
    if (any_oracle) {
        const auto reference = task.reference_posterior();
        if (!reference) {
            throw PlanError("oracle methods need a reference posterior");
        }
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t j = 0; j < observations.size(); ++j) {
            const std::uint64_t seed = sub_seed(plan.seed, cell.key, j, run);
            const OracleOutcome outcome = oracle_c2st_at(*est.sampler, *reference, observations[j], cell.n_cal,
                                                         plan.n_v, oracle_config(plan), RngStream(seed, 3));
            push_oracle_records(out, plan, cell, j, run, seed, outcome, observations[j]);
        }
        out.times.train += seconds_since(t0);
    }
    return out;
}

inline SweepResult run_sweep(const ExperimentPlan& plan, bool force_reference) {
    plan.validate();
    SweepResult result;
    result.study = plan.study;
    result.plan = plan;
    result.cells = plan_cells(plan);
    result.timing.assign(result.cells.size(), PhaseTimes{});

    std::shared_ptr<const Task> task;
    std::vector<Vector> observations;
    std::map<Eigen::Index, EstimatorBundle> estimators;
    if (!plan.is_shift_task()) {
        task = make_task(plan.task, plan.task_options);
        for (int j = 0; j < plan.n_observations; ++j) {
            observations.push_back(plan_observation(plan, *task, j));
        }
        for (auto nt : plan.n_train) {
            if (!estimators.count(nt)) {
                estimators[nt] = make_estimator(plan, *task, nt, force_reference);
            }
        }
    }

    const std::size_t n_jobs = result.cells.size() * static_cast<std::size_t>(plan.n_runs);
    std::vector<JobOutput> outputs(n_jobs);
    parallel_for(n_jobs, [&](std::size_t job) {
        const Cell& cell = result.cells[job / static_cast<std::size_t>(plan.n_runs)];
        const std::size_t run = job % static_cast<std::size_t>(plan.n_runs);
        outputs[job] = plan.is_shift_task()
                           ? shift_job(plan, cell, run)
                           : local_job(plan, *task, estimators.at(cell.n_train), observations, cell, run);
    });
    for (std::size_t job = 0; job < n_jobs; ++job) {
        result.timing[job / static_cast<std::size_t>(plan.n_runs)] += outputs[job].times;
        for (auto& r : outputs[job].records) {
            result.records.push_back(std::move(r));
        }
    }
    // Deterministic order: cell, method (plan order), observation, run.
    const auto method_rank = [&](const std::string& m) {
        return std::find(plan.methods.begin(), plan.methods.end(), m) - plan.methods.begin();
    };
    std::stable_sort(result.records.begin(), result.records.end(), [&](const RunRecord& a, const RunRecord& b) {
        return std::tuple(a.cell, method_rank(a.method), a.observation, a.run) <
               std::tuple(b.cell, method_rank(b.method), b.observation, b.run);
    });
    result.summaries = aggregate(result.cells, plan.methods, result.records, plan.alpha, plan.n_runs);
    result.monotonicity = monotonicity_report(result.summaries, plan);
    return result;
}

} // namespace detail

/// Type-I study: the estimator is replaced by the reference posterior (or the
/// exact flow), so every null hypothesis holds.
inline SweepResult run_type1(ExperimentPlan plan) {
    plan.study = "type1";
    if (plan.is_shift_task()) {
        plan.sigma = {1.0};
    } else if (!make_task(plan.task, plan.task_options)->reference_posterior()) {
        throw PlanError("type-I study needs a reference posterior for task '" + plan.task + "'");
    }
    return detail::run_sweep(plan, true);
}

/// Power study against the plan's estimator. Refuses estimators that are
/// known to equal the reference.
inline SweepResult run_power(ExperimentPlan plan) {
    plan.study = "power";
    if (!plan.is_shift_task()) {
        if (plan.estimator.is_identity()) {
            throw PlanError("power study estimator is identical to the reference posterior");
        }
        if (plan.estimator.kind == "distortion") {
            const auto task = make_task(plan.task, plan.task_options);
            const auto est = make_estimator(plan, *task, plan.n_train.front(), false);
            const auto ref = task->reference_posterior();
            // Large-sample sanity check: the estimator draws must move at least
            // one marginal at the first observation.
            const Vector x_o = plan_observation(plan, *task, 0);
            RngStream a(hash_seed(plan.seed, 0x5a17), 0);
            RngStream b(hash_seed(plan.seed, 0x5a17), 1);
            const Matrix qs = est.sampler->sample(x_o, 20000, a);
            const Matrix ps = ref->sample(x_o, 20000, b);
            bool differs = false;
            for (Eigen::Index k = 0; k < qs.cols(); ++k) {
                std::vector<double> qa(static_cast<std::size_t>(qs.rows())), pa(static_cast<std::size_t>(ps.rows()));
                for (Eigen::Index i = 0; i < qs.rows(); ++i) {
                    qa[static_cast<std::size_t>(i)] = qs(i, k);
                    pa[static_cast<std::size_t>(i)] = ps(i, k);
                }
                differs = differs || stats::ks_two_sample(qa, pa).p_value < 1e-3;
            }
            if (!differs) {
                throw PlanError("power study estimator is statistically indistinguishable from the reference");
            }
        }
    }
    return detail::run_sweep(plan, false);
}

} // namespace lc2st

#endif
