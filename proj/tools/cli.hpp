// Command-line front end. Kept in a header so the test suite can drive
// cli_main in-process.
#ifndef LC2ST_TOOLS_CLI_HPP
#define LC2ST_TOOLS_CLI_HPP

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lc2st/lc2st.hpp"

namespace lc2st::cli {

/// Bad invocation detected after flag parsing (exit code 2).
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error("usage", what) {}
};

namespace fs = std::filesystem;

struct CommonArgs {
    std::string task = "gaussian_conjugate";
    TaskOptions task_options;
    std::uint64_t seed = 0;
    std::string out = ".";
};

struct ClassifierArgs {
    std::string clf = "mlp";
    int hidden_mult = 10;
    int epochs = 1000;
    double ridge = kDefaultQdaRidge;

    ClassifierConfig config() const {
        ClassifierConfig c;
        c.kind = clf;
        c.ridge = ridge;
        c.mlp.hidden_mult = hidden_mult;
        c.mlp.max_epochs = epochs;
        return c;
    }
};

struct TestArgs {
    std::string method = "lc2st";
    Eigen::Index n_cal = 1000;
    int n_h = 100;
    Eigen::Index n_v = 10000;
    std::uint64_t x_seed = 0;
    std::string flow;
    std::string cal;
    std::vector<double> shift;
    double scale = 1.0;
    bool conservative = false;
    std::string normalization = "literal";
    int levels = 100;
    double alpha = 0.05;
};

inline void add_task_flags(CLI::App* app, CommonArgs& a) {
    app->add_option("--task", a.task, "task name")->check(CLI::IsMember(task_names()));
    app->add_option("--m", a.task_options.m, "parameter dimension (0 = task default)");
    app->add_option("--noise-std", a.task_options.noise_std, "likelihood noise (gaussian_conjugate)");
    app->add_option("--eps", a.task_options.eps, "rejection radius (two_moons)");
    app->add_option("--budget", a.task_options.budget, "rejection draw budget");
    app->add_option("--lo", a.task_options.lo, "prior box lower bound (gaussian_linear_uniform)");
    app->add_option("--hi", a.task_options.hi, "prior box upper bound (gaussian_linear_uniform)");
    app->add_option("--seed", a.seed, "master seed");
    app->add_option("--out", a.out, "output directory");
}

inline void add_classifier_flags(CLI::App* app, ClassifierArgs& c) {
    app->add_option("--clf", c.clf, "classifier")->check(CLI::IsMember({"qda", "mlp"}));
    app->add_option("--hidden-mult", c.hidden_mult, "MLP hidden width per input dimension");
    app->add_option("--epochs", c.epochs, "MLP max epochs");
    app->add_option("--ridge", c.ridge, "QDA ridge (negative = default)");
}

inline void add_test_flags(CLI::App* app, TestArgs& t) {
    app->add_option("--method", t.method, "test method")->check(CLI::IsMember(method_names()));
    app->add_option("--n-cal", t.n_cal, "calibration size (per class for oracle methods)");
    app->add_option("--n-h", t.n_h, "null ensemble size");
    app->add_option("--n-v", t.n_v, "evaluation samples");
    app->add_option("--x-seed", t.x_seed, "seed of the observation x_o");
    app->add_option("--flow", t.flow, "flow checkpoint (estimator under test)");
    app->add_option("--cal", t.cal, "calibration dataset CSV (default: simulate)");
    app->add_option("--shift", t.shift, "distortion mean shift (one value or one per dimension)")->delimiter(',');
    app->add_option("--scale", t.scale, "distortion scale");
    app->add_flag("--conservative", t.conservative, "use (1 + #{t_h >= t}) / (N_H + 1)");
    app->add_option("--normalization", t.normalization, "two-class MSE normalization")
        ->check(CLI::IsMember({"literal", "bounded"}));
}

inline fs::path prepare_out(const std::string& out) {
    fs::path p(out);
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) {
        throw UsageError("cannot create output directory " + out + ": " + ec.message());
    }
    return p;
}

inline void require_file(const std::string& path, const char* flag) {
    if (!fs::is_regular_file(path)) {
        throw UsageError(std::string(flag) + ": no such file '" + path + "'");
    }
}

inline ConditionalFlow load_flow(const std::string& path, const Task& task) {
    require_file(path, "--flow");
    ConditionalFlow flow = ConditionalFlow::from_json(read_json_file(path));
    if (flow.theta_dim() != task.theta_dim() || flow.x_dim() != task.x_dim()) {
        throw UsageError("flow dimensions (" + std::to_string(flow.theta_dim()) + ", " + std::to_string(flow.x_dim()) +
                         ") do not match task '" + task.name() + "' (" + std::to_string(task.theta_dim()) + ", " +
                         std::to_string(task.x_dim()) + ")");
    }
    return flow;
}

inline JointDataset calibration_set(const TestArgs& t, const Task& task, RngStream rng) {
    if (t.cal.empty()) {
        return task.sample_joint(t.n_cal, rng);
    }
    require_file(t.cal, "--cal");
    JointDataset cal = load_dataset(t.cal);
    if (cal.theta_dim() != task.theta_dim() || cal.x_dim() != task.x_dim()) {
        throw UsageError("calibration data dimensions do not match the task");
    }
    return cal;
}

/// Estimator named by the flags: a flow checkpoint, a distortion of the
/// reference posterior, or the reference itself.
inline std::shared_ptr<const ConditionalSampler> estimator_from(const TestArgs& t, const Task& task,
                                                               std::shared_ptr<const ConditionalFlow> flow) {
    if (flow) {
        return flow;
    }
    const auto ref = task.reference_posterior();
    if (!ref) {
        throw UsageError("task '" + task.name() + "' has no reference posterior; pass --flow");
    }
    if (t.shift.empty() && t.scale == 1.0) {
        return ref;
    }
    Vector shift = Vector::Zero(task.theta_dim());
    if (t.shift.size() == 1) {
        shift.setConstant(t.shift[0]);
    } else if (!t.shift.empty()) {
        if (static_cast<int>(t.shift.size()) != task.theta_dim()) {
            throw UsageError("--shift needs 1 or " + std::to_string(task.theta_dim()) + " values");
        }
        shift = Eigen::Map<const Vector>(t.shift.data(), static_cast<Eigen::Index>(t.shift.size()));
    }
    return distort(ref, shift, t.scale);
}

struct LocalRun {
    TrainedTest trained;
    TestResult result;
    Matrix eval_features;
};

/// Trains and evaluates one local test (lc2st or lc2st-nf) at x_o.
inline LocalRun run_local(const TestArgs& t, const CommonArgs& c, const ClassifierArgs& k, const Task& task,
                          std::shared_ptr<const ConditionalFlow> flow, const Vector& x_o) {
    RngStream rng(c.seed, 0);
    const JointDataset cal = calibration_set(t, task, rng.child(0));
    LocalRun out;
    if (t.method == "lc2st") {
        const auto est = estimator_from(t, task, flow);
        out.trained = lc2st_train(*est, cal, k.config(), t.n_h, rng.child(1));
        RngStream eval_rng = rng.child(2);
        const Matrix theta_q = est->sample(x_o, t.n_v, eval_rng);
        out.eval_features = pair_with(theta_q, x_o);
        out.result = detail::evaluate_mse0("lc2st", *out.trained.classifier, out.trained.null, out.eval_features, x_o,
                                           t.conservative);
    } else {
        out.trained = lc2st_nf_train(*flow, cal, k.config(), rng.child(1));
        if (t.n_h > 0) {
            out.trained.null = lc2st_nf_null(cal.xs(), task.theta_dim(), k.config(), t.n_h, rng.child(3));
        }
        RngStream eval_rng = rng.child(2);
        out.eval_features = pair_with(eval_rng.normal_matrix(t.n_v, task.theta_dim()), x_o);
        out.result = detail::evaluate_mse0("lc2st-nf", *out.trained.classifier, out.trained.null, out.eval_features,
                                           x_o, t.conservative);
    }
    out.result.seeds = {{"master", c.seed}, {"x_seed", t.x_seed}};
    return out;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Local classifier two-sample tests for posterior estimators"};
    app.require_subcommand(1);

    CommonArgs common;
    ClassifierArgs clf;
    TestArgs test;

    auto* simulate = app.add_subcommand("simulate", "draw a joint dataset from a task");
    Eigen::Index n_sim = 1000;
    add_task_flags(simulate, common);
    simulate->add_option("--n", n_sim, "number of joint samples")->required();

    auto* train_npe = app.add_subcommand("train-npe", "fit a conditional flow by neural posterior estimation");
    Eigen::Index n_train = 1000;
    FlowConfig flow_cfg;
    NpeConfig npe_cfg;
    std::string data_path;
    add_task_flags(train_npe, common);
    train_npe->add_option("--n-train", n_train, "training samples");
    train_npe->add_option("--data", data_path, "training dataset CSV (default: simulate)");
    train_npe->add_option("--layers", flow_cfg.layers, "coupling blocks");
    train_npe->add_option("--width", flow_cfg.hidden_width, "conditioner width");
    train_npe->add_option("--epochs", npe_cfg.max_epochs, "max epochs");
    train_npe->add_option("--batch-size", npe_cfg.batch_size, "mini-batch size");
    train_npe->add_option("--lr", npe_cfg.learning_rate, "learning rate");
    train_npe->add_option("--patience", npe_cfg.patience, "early-stopping patience");

    auto* test_cmd = app.add_subcommand("test", "run one test at one observation");
    add_task_flags(test_cmd, common);
    add_classifier_flags(test_cmd, clf);
    add_test_flags(test_cmd, test);

    auto* ppplot = app.add_subcommand("ppplot", "local PP-plot data with null bands");
    add_task_flags(ppplot, common);
    add_classifier_flags(ppplot, clf);
    add_test_flags(ppplot, test);
    ppplot->add_option("--levels", test.levels, "number of levels in [0.005, 0.995]");
    ppplot->add_option("--alpha", test.alpha, "band level");

    auto* heatmap = app.add_subcommand("heatmap", "mean class-0 probability per marginal bin");
    Eigen::Index n_heat = 10000;
    int bins = 20;
    add_task_flags(heatmap, common);
    add_classifier_flags(heatmap, clf);
    heatmap->add_option("--flow", test.flow, "flow checkpoint")->required();
    heatmap->add_option("--n-cal", test.n_cal, "calibration size");
    heatmap->add_option("--x-seed", test.x_seed, "seed of the observation x_o");
    heatmap->add_option("--n", n_heat, "latent samples");
    heatmap->add_option("--bins", bins, "bins per axis");

    auto* sweep = app.add_subcommand("sweep", "run an experiment plan");
    std::string plan_path;
    sweep->add_option("--plan", plan_path, "plan JSON")->required();
    sweep->add_option("--out", common.out, "output directory");

    auto* bench = app.add_subcommand("bench", "runtime benchmark");
    bench->add_option("--plan", plan_path, "plan JSON (study forced to bench)");
    bench->add_option("--out", common.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: usage: " << msg << '\n';
        return 2;
    }

    try {
        if (test.method == "lc2st-nf" && (test_cmd->parsed() || ppplot->parsed()) && test.flow.empty()) {
            throw UsageError("--method lc2st-nf requires --flow");
        }
        if (test.n_cal < 1 || test.n_v < 1 || test.n_h < 0) {
            throw UsageError("--n-cal and --n-v must be positive and --n-h nonnegative");
        }
        const fs::path dir = prepare_out(common.out);

        if (sweep->parsed() || bench->parsed()) {
            if (bench->parsed() && plan_path.empty()) {
                throw UsageError("bench requires --plan");
            }
            require_file(plan_path, "--plan");
            ExperimentPlan plan = load_plan(plan_path);
            if (bench->parsed()) {
                plan.study = "bench";
            }
            if (plan.study == "type1" || plan.study == "power") {
                const SweepResult r = plan.study == "type1" ? run_type1(plan) : run_power(plan);
                write_text_file(dir / "results.json", r.to_json().dump(2) + "\n");
                write_text_file(dir / "timing.json", r.timing_json().dump(2) + "\n");
                const std::string stem = plan.study == "type1" ? "type1" : "power";
                write_text_file(dir / (stem + ".csv"), r.rates_csv(plan.methods.front()));
                if (plan.methods.size() > 1) {
                    for (const auto& m : plan.methods) {
                        write_text_file(dir / (stem + "_" + m + ".csv"), r.rates_csv(m));
                    }
                }
            } else if (plan.study == "correlation") {
                const CorrelationResult r = run_oracle_correlation(plan);
                write_text_file(dir / "correlation.csv", r.to_csv());
                write_text_file(dir / "correlation.json", r.to_json().dump(2) + "\n");
            } else if (plan.study == "amortization") {
                const AmortizationResult r = run_nf_amortization(plan);
                write_text_file(dir / "amortization.json", r.to_json().dump(2) + "\n");
            } else {
                const BenchResult r = run_runtime_bench(plan);
                write_text_file(dir / "runtime.csv", r.to_csv());
                write_text_file(dir / "bench.json", r.to_json().dump(2) + "\n");
            }
            return 0;
        }

        const auto task = make_task(common.task, common.task_options);

        if (simulate->parsed()) {
            if (n_sim < 0) {
                throw UsageError("--n must be nonnegative");
            }
            RngStream rng(common.seed, 0);
            const JointDataset data = task->sample_joint(n_sim, rng);
            save_dataset(data, dir / "data.csv");
            const DatasetMetadata meta{task->theta_dim(), task->x_dim(), n_sim, common.seed, task->name()};
            write_text_file(dir / "data.json", nlohmann::json(meta).dump(2) + "\n");
            return 0;
        }

        if (train_npe->parsed()) {
            JointDataset data(task->theta_dim(), task->x_dim());
            if (data_path.empty()) {
                RngStream rng(common.seed, 0);
                data = task->sample_joint(n_train, rng);
            } else {
                require_file(data_path, "--data");
                data = load_dataset(data_path);
                if (data.theta_dim() != task->theta_dim() || data.x_dim() != task->x_dim()) {
                    throw UsageError("training data dimensions do not match the task");
                }
            }
            ConditionalFlow flow =
                build_flow(task->theta_dim(), task->x_dim(), flow_cfg, RngStream(common.seed, 1), &data);
            const NpeResult fit = fit_npe(std::move(flow), data, npe_cfg, RngStream(common.seed, 2));
            write_text_file(dir / "flow.json", fit.flow.to_json().dump() + "\n");
            std::ostringstream trace;
            trace << "epoch,train_nll,val_nll\n";
            for (std::size_t e = 0; e < fit.trace.train_loss.size(); ++e) {
                trace << e << ',' << format_double(fit.trace.train_loss[e]) << ','
                      << format_double(fit.trace.val_loss[e]) << '\n';
            }
            write_text_file(dir / "trace.csv", trace.str());
            return 0;
        }

        std::shared_ptr<const ConditionalFlow> flow;
        if (!test.flow.empty()) {
            flow = std::make_shared<ConditionalFlow>(load_flow(test.flow, *task));
        }
        const Vector x_o = task->observation(test.x_seed);

        if (test_cmd->parsed()) {
            TestResult result;
            if (is_oracle_method(test.method)) {
                const auto ref = task->reference_posterior();
                if (!ref) {
                    throw UsageError("oracle methods need a task with a reference posterior");
                }
                OracleConfig cfg;
                cfg.classifier = clf.config();
                cfg.n_h = test.n_h;
                cfg.normalization = parse_mse_normalization(test.normalization);
                cfg.conservative = test.conservative;
                const auto est = estimator_from(test, *task, flow);
                const OracleOutcome o = oracle_c2st_at(*est, *ref, x_o, test.n_cal, test.n_v, cfg, RngStream(common.seed, 0));
                result = o.as_result(oracle_statistic_of(test.method), x_o);
                result.seeds = {{"master", common.seed}, {"x_seed", test.x_seed}};
            } else {
                result = run_local(test, common, clf, *task, flow, x_o).result;
            }
            write_text_file(dir / "result.json", result.to_json().dump(2) + "\n");
            return 0;
        }

        if (ppplot->parsed()) {
            if (is_oracle_method(test.method)) {
                throw UsageError("ppplot supports lc2st and lc2st-nf");
            }
            if (test.n_h < 1) {
                throw UsageError("ppplot needs --n-h >= 1 for the bands");
            }
            if (!(test.alpha > 0.0 && test.alpha < 1.0) || test.levels < 1) {
                throw UsageError("--alpha must be in (0, 1) and --levels positive");
            }
            const LocalRun run = run_local(test, common, clf, *task, flow, x_o);
            const PPPlotData pp =
                pp_plot(*run.trained.classifier, run.trained.null, run.eval_features, default_levels(test.levels), test.alpha);
            write_text_file(dir / "ppplot.csv", pp.to_csv());
            write_text_file(dir / "result.json", run.result.to_json().dump(2) + "\n");
            return 0;
        }

        if (heatmap->parsed()) {
            RngStream rng(common.seed, 0);
            const JointDataset cal = calibration_set(test, *task, rng.child(0));
            const TrainedTest trained = lc2st_nf_train(*flow, cal, clf.config(), rng.child(1));
            const HeatmapData h = probability_heatmap(*trained.classifier, *flow, x_o, n_heat, bins, rng.child(2));
            write_text_file(dir / "heatmap.csv", h.to_csv());
            return 0;
        }
    } catch (const UsageError& e) {
        err << "error: usage: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << e.kind() << ": " << msg << '\n';
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: parse: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

} // namespace lc2st::cli

#endif
