#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "support.hpp"

namespace lc2st {
namespace {

using testing::scratch_dir;

ExperimentPlan small_plan() {
    ExperimentPlan p;
    p.study = "type1";
    p.methods = {"lc2st"};
    p.n_train = {100};
    p.n_cal = {200};
    p.n_observations = 2;
    p.n_runs = 4;
    p.n_h = 10;
    p.n_v = 200;
    p.seed = 5;
    p.classifier.kind = "qda";
    return p;
}

// ---------------------------------------------------------------------------
// Plans

TEST(Plan, ValidationRejectsBadFields) {
    const auto broken = [](auto edit) {
        ExperimentPlan p = small_plan();
        edit(p);
        return p;
    };
    EXPECT_NO_THROW(small_plan().validate());
    EXPECT_THROW(broken([](auto& p) { p.study = "nope"; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.methods = {"lc2st-xx"}; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.methods.clear(); }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.n_cal = {0}; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.n_runs = 0; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.alpha = 0.0; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.alpha = 1.5; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) { p.task = "unknown"; }).validate(), ConfigError);
    EXPECT_THROW(broken([](auto& p) {
                     p.task = "gaussian_shift";
                     p.sigma = {1.0};
                 }).validate(),
                 ConfigError); // lc2st is not an oracle method
}

TEST(Plan, JsonRoundTrip) {
    ExperimentPlan p = small_plan();
    p.estimator.kind = "distortion";
    p.estimator.shift = {0.5, -0.5};
    p.normalization = MseNormalization::bounded;
    const nlohmann::json j = p;
    const ExperimentPlan back = nlohmann::json::parse(j.dump()).get<ExperimentPlan>();
    EXPECT_EQ(nlohmann::json(back).dump(), j.dump());
}

TEST(Plan, SingleMethodKeyIsAccepted) {
    const auto p = nlohmann::json::parse(R"({"study": "power", "method": "lc2st-nf", "n_cal": [50]})")
                       .get<ExperimentPlan>();
    EXPECT_EQ(p.methods, std::vector<std::string>{"lc2st-nf"});
    EXPECT_EQ(p.n_cal, std::vector<Eigen::Index>{50});
}

TEST(Plan, MalformedFileIsParseError) {
    const auto dir = scratch_dir("bad_plan");
    write_text_file(dir / "plan.json", "{\"n_runs\": ");
    EXPECT_THROW(load_plan(dir / "plan.json"), ParseError);
}

// ---------------------------------------------------------------------------
// Sweeps

TEST(Sweep, AlphaOneRejectsUnlessMainIsTheMinimum) {
    ExperimentPlan p = small_plan();
    p.alpha = 1.0;
    p.n_h = 50;
    const SweepResult r = run_type1(p);
    ASSERT_EQ(r.records.size(), 8u);
    for (const auto& rec : r.records) {
        ASSERT_TRUE(rec.result.p_value.has_value());
        EXPECT_EQ(rec.result.rejected(1.0), *rec.result.p_value < 1.0);
    }
    EXPECT_GE(r.summary(0, "lc2st").rate, 0.75);
}

TEST(Sweep, Lc2stNullPValuesAreUniformUnderTheNull) {
    ExperimentPlan p = small_plan();
    p.n_cal = {1000};
    p.n_observations = 1;
    p.n_runs = 300;
    p.n_h = 50;
    p.n_v = 1000;
    const SweepResult r = run_type1(p);
    std::vector<double> ps;
    for (const RunRecord& rec : r.records) {
        ps.push_back(*rec.result.p_value);
    }
    ASSERT_EQ(ps.size(), 300u);
    EXPECT_GT(stats::ks_uniform(ps).p_value, 0.01);
    // Mean of 300 uniforms: sd about 0.017.
    EXPECT_NEAR(stats::mean(ps), 0.5, 0.06);
}

TEST(Sweep, SingleRunHasZeroSeAndWarning) {
    ExperimentPlan p = small_plan();
    p.n_runs = 1;
    const SweepResult r = run_type1(p);
    const CellSummary& s = r.summary(0, "lc2st");
    EXPECT_EQ(s.se, 0.0);
    EXPECT_TRUE(s.small_sample);
    EXPECT_TRUE(r.to_json().at("summaries")[0].at("small_sample_warning").get<bool>());
}

TEST(Sweep, SameSeedGivesIdenticalResults) {
    ExperimentPlan p = small_plan();
    p.methods = {"lc2st", "lc2st-nf", "oracle-c2st-mse"};
    const SweepResult a = run_type1(p);
    const SweepResult b = run_type1(p);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
    p.seed = 6;
    EXPECT_NE(run_type1(p).to_json().dump(), a.to_json().dump());
}

TEST(Sweep, AggregatesMatchRawRecords) {
    ExperimentPlan p = small_plan();
    p.n_cal = {100, 300};
    p.methods = {"lc2st", "lc2st-nf"};
    p.alpha = 0.3;
    const nlohmann::json j = run_type1(p).to_json();
    for (const auto& s : j.at("summaries")) {
        std::size_t n = 0;
        std::size_t rejected = 0;
        for (const auto& rec : j.at("records")) {
            if (rec.at("cell") != s.at("cell") || rec.at("method") != s.at("method")) {
                continue;
            }
            ++n;
            const auto& pv = rec.at("result").at("p_value");
            rejected += (!pv.is_null() && pv.get<double>() < 0.3) ? 1 : 0;
        }
        ASSERT_EQ(n, s.at("n_tests").get<std::size_t>());
        const double rate = static_cast<double>(rejected) / static_cast<double>(n);
        EXPECT_EQ(rate, s.at("rate").get<double>());
        EXPECT_EQ(std::sqrt(rate * (1.0 - rate) / static_cast<double>(n)), s.at("se").get<double>());
    }
}

TEST(Sweep, SingleCellReproducesItsPartOfTheGrid) {
    ExperimentPlan p = small_plan();
    p.n_cal = {100, 300};
    p.methods = {"lc2st", "lc2st-nf"};
    const SweepResult full = run_type1(p);
    p.n_cal = {300};
    const SweepResult alone = run_type1(p);
    std::vector<const RunRecord*> from_full;
    for (const auto& r : full.records) {
        if (r.cell == 1) {
            from_full.push_back(&r);
        }
    }
    ASSERT_EQ(from_full.size(), alone.records.size());
    for (std::size_t i = 0; i < alone.records.size(); ++i) {
        EXPECT_EQ(from_full[i]->seed, alone.records[i].seed);
        EXPECT_EQ(from_full[i]->result.statistic, alone.records[i].result.statistic);
        EXPECT_EQ(from_full[i]->result.p_value, alone.records[i].result.p_value);
    }
    for (const auto* m : {"lc2st", "lc2st-nf"}) {
        EXPECT_EQ(full.summary(1, m).rate, alone.summary(0, m).rate);
    }
}

TEST(Sweep, PowerRefusesIdentityEstimators) {
    ExperimentPlan p = small_plan();
    p.estimator.kind = "reference";
    EXPECT_THROW(run_power(p), PlanError);
    p.estimator.kind = "distortion";
    EXPECT_THROW(run_power(p), PlanError);
    p.estimator.shift = {0.0, 0.0};
    EXPECT_THROW(run_power(p), PlanError);
    // A tiny distortion passes the identity check but not the sample check.
    p.estimator.scale = 1.0 + 1e-9;
    EXPECT_THROW(run_power(p), PlanError);
}

TEST(Sweep, PowerDetectsStrongDistortion) {
    ExperimentPlan p = small_plan();
    p.study = "power";
    p.estimator.kind = "distortion";
    p.estimator.scale = 2.0;
    p.n_cal = {2000};
    p.n_v = 1000;
    p.methods = {"lc2st", "lc2st-nf"};
    const SweepResult r = run_power(p);
    EXPECT_EQ(r.summary(0, "lc2st").rate, 1.0);
    EXPECT_EQ(r.summary(0, "lc2st-nf").rate, 1.0);
    ASSERT_EQ(r.monotonicity.size(), 2u);
}

TEST(Sweep, ShiftTaskWritesSigmaTable) {
    ExperimentPlan p;
    p.task = "gaussian_shift";
    p.methods = {"oracle-c2st-mse0", "oracle-c2st-acc0"};
    p.sigma = {1.0, 0.5};
    p.n_cal = {300};
    p.n_v = 300;
    p.n_runs = 3;
    p.n_h = 10;
    p.classifier.kind = "qda";
    const SweepResult r = run_power(p);
    EXPECT_EQ(r.cells.size(), 2u);
    EXPECT_EQ(r.summary(1, "oracle-c2st-mse0").rate, 1.0);
    const std::string csv = r.rates_csv("oracle-c2st-mse0");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "sigma,n_runs,tpr,se");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Sweep, TypeOneTableHasUniformityColumn) {
    const SweepResult r = run_type1(small_plan());
    const std::string csv = r.rates_csv("lc2st");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "n_train,n_cal,n_runs,rejection_rate,se,ks_p");
    EXPECT_EQ(r.timing.size(), r.cells.size());
    EXPECT_FALSE(r.to_json().contains("timing"));
}

// ---------------------------------------------------------------------------
// Studies

TEST(Correlation, SingleObservationIsAnError) {
    ExperimentPlan p = small_plan();
    p.study = "correlation";
    p.n_observations = 1;
    EXPECT_THROW(run_oracle_correlation(p), PlanError);
}

TEST(Correlation, DistortionGrowingWithObservationIsTracked) {
    ExperimentPlan p = small_plan();
    p.study = "correlation";
    p.estimator.kind = "distortion";
    p.estimator.scale = 1.0;
    p.estimator.scale_slope = 1.0;
    p.n_observations = 20;
    p.n_cal = {2000};
    p.n_v = 2000;
    p.n_permutations = 500;
    const auto r = run_oracle_correlation(p);
    ASSERT_EQ(r.oracle.size(), 20u);
    EXPECT_GT(r.test.rho, 0.0);
    EXPECT_LT(r.test.p_value, 0.05);
    const std::string csv = r.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "observation,oracle_t_mse,local_t_mse0");
}

TEST(Bench, ZeroNullSizeReportsZeroNullPhase) {
    ExperimentPlan p = small_plan();
    p.study = "bench";
    p.methods = {"lc2st", "lc2st-nf"};
    p.n_h = 0;
    p.repetitions = 3;
    const BenchResult r = run_runtime_bench(p);
    for (const auto* m : {"lc2st", "lc2st-nf"}) {
        EXPECT_EQ(r.row(m, 200, "null").median_seconds, 0.0) << m;
        EXPECT_GT(r.row(m, 200, "train").median_seconds, 0.0) << m;
        EXPECT_EQ(r.row(m, 200, "train").samples.size(), 3u);
    }
    const std::string csv = r.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,n_train,n_cal,phase,median_seconds");
    EXPECT_TRUE(r.to_json().at("machine").contains("worker_threads"));
}

TEST(Bench, LargerCalibrationSetTakesLongerToTrain) {
    ExperimentPlan p = small_plan();
    p.study = "bench";
    p.n_cal = {500, 50000};
    p.n_h = 0;
    p.repetitions = 3;
    const BenchResult r = run_runtime_bench(p);
    EXPECT_GT(r.row("lc2st", 50000, "train").median_seconds, r.row("lc2st", 500, "train").median_seconds);
}

// ---------------------------------------------------------------------------
// Command line

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "lc2st_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

TEST(Cli, TestWritesResultJson) {
    const auto dir = scratch_dir("cli_test");
    const CliRun r = cli({"test", "--method", "lc2st", "--task", "gaussian_conjugate", "--n-cal", "1000", "--x-seed",
                          "7", "--clf", "qda", "--n-h", "5", "--n-v", "500", "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = nlohmann::json::parse(slurp(dir / "result.json"));
    const TestResult back = TestResult::from_json(j);
    EXPECT_EQ(back.method, "lc2st");
    EXPECT_EQ(back.n_h, 5u);
    EXPECT_EQ(back.null_statistics.size(), 5u);
    EXPECT_EQ(back.x_o, gaussian_conjugate_task(2, 1.0)->observation(7));
    EXPECT_TRUE(back.p_value.has_value());
}

TEST(Cli, SweepWritesPowerCsv) {
    const auto dir = scratch_dir("cli_sweep");
    write_text_file(dir / "plan.json", R"({"study": "power", "task": "gaussian_shift",
        "methods": ["oracle-c2st-mse0"], "sigma": [1.0, 1.5], "n_cal": [300], "n_v": 300,
        "n_runs": 2, "n_h": 5, "classifier": "qda"})");
    const CliRun r = cli({"sweep", "--plan", (dir / "plan.json").string(), "--out", (dir / "r").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "r" / "power.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "sigma,n_runs,tpr,se");
    EXPECT_TRUE(std::filesystem::exists(dir / "r" / "results.json"));
    EXPECT_TRUE(std::filesystem::exists(dir / "r" / "timing.json"));
    const CliRun again = cli({"sweep", "--plan", (dir / "plan.json").string(), "--out", (dir / "r2").string()});
    ASSERT_EQ(again.code, 0) << again.err;
    EXPECT_EQ(slurp(dir / "r" / "results.json"), slurp(dir / "r2" / "results.json"));
    EXPECT_EQ(csv, slurp(dir / "r2" / "power.csv"));
}

TEST(Cli, FlowMethodWithoutCheckpointIsUsageError) {
    const CliRun r = cli({"test", "--method", "lc2st-nf", "--out", scratch_dir("cli_nf").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, UnknownFlagIsUsageError) {
    const CliRun r = cli({"test", "--no-such-flag"});
    EXPECT_EQ(r.code, 2);
    EXPECT_EQ(r.err.rfind("error: usage: ", 0), 0u) << r.err;
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({}).code, 2);
}

TEST(Cli, MissingFileIsUsageError) {
    const auto dir = scratch_dir("cli_missing");
    EXPECT_EQ(cli({"sweep", "--plan", (dir / "nope.json").string(), "--out", dir.string()}).code, 2);
    EXPECT_EQ(cli({"test", "--method", "lc2st-nf", "--flow", (dir / "nope.json").string(), "--out", dir.string()}).code,
              2);
}

TEST(Cli, FlowDimensionMismatchIsUsageError) {
    const auto dir = scratch_dir("cli_dims");
    write_text_file(dir / "flow.json", make_conjugate_gaussian_flow(3, 1.0).to_json().dump());
    const CliRun r = cli({"test", "--method", "lc2st-nf", "--flow", (dir / "flow.json").string(), "--out",
                          dir.string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("do not match"), std::string::npos) << r.err;
}

TEST(Cli, RuntimeFailureExitsOne) {
    const auto dir = scratch_dir("cli_runtime");
    write_text_file(dir / "cal.csv", "theta_0,theta_1,x_0,x_1\n1,2,3\n");
    const CliRun r = cli({"test", "--method", "lc2st", "--cal", (dir / "cal.csv").string(), "--clf", "qda", "--out",
                          dir.string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("error: parse: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, FlowPipelineRunsEndToEnd) {
    const auto dir = scratch_dir("cli_flow");
    const std::string out = dir.string();
    ASSERT_EQ(cli({"simulate", "--n", "300", "--seed", "1", "--out", out}).code, 0);
    EXPECT_TRUE(std::filesystem::exists(dir / "data.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "data.json"));
    const CliRun train = cli({"train-npe", "--data", (dir / "data.csv").string(), "--epochs", "3", "--layers", "2",
                              "--width", "8", "--out", out});
    ASSERT_EQ(train.code, 0) << train.err;
    const std::string flow = (dir / "flow.json").string();
    const std::string trace = slurp(dir / "trace.csv");
    EXPECT_EQ(std::count(trace.begin(), trace.end(), '\n'), 4);

    const CliRun pp = cli({"ppplot", "--method", "lc2st-nf", "--flow", flow, "--n-cal", "300", "--n-h", "5",
                           "--n-v", "200", "--levels", "20", "--clf", "qda", "--out", out});
    ASSERT_EQ(pp.code, 0) << pp.err;
    const std::string csv = slurp(dir / "ppplot.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 21);

    const CliRun heat = cli({"heatmap", "--flow", flow, "--n-cal", "300", "--n", "500", "--bins", "4", "--clf", "qda",
                             "--out", out});
    ASSERT_EQ(heat.code, 0) << heat.err;
    const std::string map = slurp(dir / "heatmap.csv");
    // Two 4-bin marginals and one 4 x 4 pair.
    EXPECT_EQ(std::count(map.begin(), map.end(), '\n'), 1 + 4 + 4 + 16);
}

TEST(Cli, BenchWritesRuntimeCsv) {
    const auto dir = scratch_dir("cli_bench");
    write_text_file(dir / "plan.json", R"({"methods": ["lc2st"], "n_cal": [100], "n_train": [100],
        "n_observations": 2, "n_h": 2, "n_v": 100, "repetitions": 3, "classifier": "qda"})");
    const CliRun r = cli({"bench", "--plan", (dir / "plan.json").string(), "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string csv = slurp(dir / "runtime.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,n_train,n_cal,phase,median_seconds");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_TRUE(std::filesystem::exists(dir / "bench.json"));
}

} // namespace
} // namespace lc2st
