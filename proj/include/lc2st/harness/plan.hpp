#ifndef LC2ST_HARNESS_PLAN_HPP
#define LC2ST_HARNESS_PLAN_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lc2st/c2st/oracle.hpp"
#include "lc2st/c2st/statistics.hpp"
#include "lc2st/classifiers/factory.hpp"
#include "lc2st/flows/train.hpp"
#include "lc2st/tasks/registry.hpp"

namespace lc2st {

inline const std::vector<std::string>& method_names() {
    static const std::vector<std::string> names{"oracle-c2st-acc",  "oracle-c2st-mse", "oracle-c2st-acc0",
                                                "oracle-c2st-mse0", "lc2st",           "lc2st-nf"};
    return names;
}

inline bool is_oracle_method(const std::string& m) { return m.rfind("oracle-c2st-", 0) == 0; }

inline OracleStatistic oracle_statistic_of(const std::string& m) {
    if (m == "oracle-c2st-acc") return OracleStatistic::acc;
    if (m == "oracle-c2st-mse") return OracleStatistic::mse;
    if (m == "oracle-c2st-acc0") return OracleStatistic::acc0;
    if (m == "oracle-c2st-mse0") return OracleStatistic::mse0;
    throw ConfigError("'" + m + "' is not an oracle method");
}

/// Which posterior estimator a study tests.
struct EstimatorSpec {
    std::string kind = "reference"; // reference | distortion | flow
    std::vector<double> shift;      // empty means zero
    double scale = 1.0;
    double scale_slope = 0.0; // distortion scale at x is scale + scale_slope * |x_0|
    std::string flow_path;    // flow kind: checkpoint to load; empty trains one per N_train
    FlowConfig flow;
    NpeConfig npe;

    bool is_identity() const {
        if (kind != "distortion") {
            return kind == "reference";
        }
        for (double s : shift) {
            if (s != 0.0) return false;
        }
        return scale == 1.0 && scale_slope == 0.0;
    }
};

inline void to_json(nlohmann::json& j, const EstimatorSpec& e) {
    j = nlohmann::json{{"kind", e.kind},           {"shift", e.shift}, {"scale", e.scale},
                       {"scale_slope", e.scale_slope}, {"flow_path", e.flow_path}, {"flow", e.flow},
                       {"npe", e.npe}};
}

inline void from_json(const nlohmann::json& j, EstimatorSpec& e) {
    e = EstimatorSpec{};
    if (j.contains("kind")) j.at("kind").get_to(e.kind);
    if (j.contains("shift")) {
        if (j.at("shift").is_number()) {
            e.shift = {j.at("shift").get<double>()};
        } else {
            j.at("shift").get_to(e.shift);
        }
    }
    if (j.contains("scale")) j.at("scale").get_to(e.scale);
    if (j.contains("scale_slope")) j.at("scale_slope").get_to(e.scale_slope);
    if (j.contains("flow_path")) j.at("flow_path").get_to(e.flow_path);
    if (j.contains("flow")) j.at("flow").get_to(e.flow);
    if (j.contains("npe")) j.at("npe").get_to(e.npe);
    if (e.kind != "reference" && e.kind != "distortion" && e.kind != "flow") {
        throw ConfigError("unknown estimator kind '" + e.kind + "'");
    }
}

/**
 * A study over a grid of cells. For the gaussian_shift task the cells are
 * the sigma values; otherwise they are the N_train x N_cal product.
 */
struct ExperimentPlan {
    std::string study = "power"; // type1 | power | correlation | bench | amortization
    std::string task = "gaussian_conjugate";
    TaskOptions task_options;
    std::vector<std::string> methods{"lc2st"};
    std::vector<Eigen::Index> n_train{1000};
    std::vector<Eigen::Index> n_cal{1000};
    std::vector<double> sigma; // gaussian_shift only
    int dim = 2;               // gaussian_shift only
    int n_observations = 10;
    int n_runs = 50;
    double alpha = 0.05;
    int n_h = 100;
    Eigen::Index n_v = 10000;
    std::uint64_t seed = 0;
    ClassifierConfig classifier;
    EstimatorSpec estimator;
    MseNormalization normalization = MseNormalization::literal;
    bool conservative = false;
    int repetitions = 3; // bench
    int n_permutations = 1000; // correlation test

    bool is_shift_task() const { return task == "gaussian_shift"; }

    void validate() const {
        static const std::vector<std::string> studies{"type1", "power", "correlation", "bench", "amortization"};
        if (std::find(studies.begin(), studies.end(), study) == studies.end()) {
            throw ConfigError("unknown study '" + study + "'");
        }
        if (methods.empty()) {
            throw ConfigError("plan needs at least one method");
        }
        for (const auto& m : methods) {
            if (std::find(method_names().begin(), method_names().end(), m) == method_names().end()) {
                throw ConfigError("unknown method '" + m + "'");
            }
            if (is_shift_task() && !is_oracle_method(m)) {
                throw ConfigError("gaussian_shift plans support the oracle methods only");
            }
        }
        if (is_shift_task()) {
            if (sigma.empty()) {
                throw ConfigError("gaussian_shift plan needs a sigma grid");
            }
            for (double s : sigma) {
                if (!(s > 0.0)) throw ConfigError("sigma values must be positive");
            }
            if (dim < 1) throw ConfigError("dim must be positive");
        } else {
            make_task(task, task_options); // throws on unknown task
        }
        if (n_train.empty() || n_cal.empty()) {
            throw ConfigError("n_train and n_cal grids must be nonempty");
        }
        for (auto n : n_train) {
            if (n < 1) throw ConfigError("n_train values must be positive");
        }
        for (auto n : n_cal) {
            if (n < 1) throw ConfigError("n_cal values must be positive");
        }
        if (n_observations < 1 || n_runs < 1 || n_v < 1 || repetitions < 1) {
            throw ConfigError("n_observations, n_runs, n_v and repetitions must be positive");
        }
        if (n_h < 0) {
            throw ConfigError("n_h must be nonnegative");
        }
        if (!(alpha > 0.0 && alpha <= 1.0)) {
            throw ConfigError("alpha must be in (0, 1]");
        }
        classifier.validate();
    }
};

inline void to_json(nlohmann::json& j, const ExperimentPlan& p) {
    j = nlohmann::json{{"study", p.study},
                       {"task", p.task},
                       {"task_options", p.task_options},
                       {"methods", p.methods},
                       {"n_train", p.n_train},
                       {"n_cal", p.n_cal},
                       {"sigma", p.sigma},
                       {"dim", p.dim},
                       {"n_observations", p.n_observations},
                       {"n_runs", p.n_runs},
                       {"alpha", p.alpha},
                       {"n_h", p.n_h},
                       {"n_v", p.n_v},
                       {"seed", p.seed},
                       {"classifier", p.classifier},
                       {"estimator", p.estimator},
                       {"normalization", p.normalization == MseNormalization::literal ? "literal" : "bounded"},
                       {"conservative", p.conservative},
                       {"repetitions", p.repetitions},
                       {"n_permutations", p.n_permutations}};
}

inline void from_json(const nlohmann::json& j, ExperimentPlan& p) {
    p = ExperimentPlan{};
    const auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("study", p.study);
    get("task", p.task);
    get("task_options", p.task_options);
    if (j.contains("method")) {
        p.methods = {j.at("method").get<std::string>()};
    }
    get("methods", p.methods);
    get("n_train", p.n_train);
    get("n_cal", p.n_cal);
    get("sigma", p.sigma);
    get("dim", p.dim);
    get("n_observations", p.n_observations);
    get("n_runs", p.n_runs);
    get("alpha", p.alpha);
    get("n_h", p.n_h);
    get("n_v", p.n_v);
    get("seed", p.seed);
    get("classifier", p.classifier);
    get("estimator", p.estimator);
    if (j.contains("normalization")) {
        p.normalization = parse_mse_normalization(j.at("normalization").get<std::string>());
    }
    get("conservative", p.conservative);
    get("repetitions", p.repetitions);
    get("n_permutations", p.n_permutations);
    p.validate();
}

inline ExperimentPlan load_plan(const std::filesystem::path& path) {
    try {
        return read_json_file(path).get<ExperimentPlan>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("plan " + path.string() + ": " + e.what());
    }
}

} // namespace lc2st

#endif
