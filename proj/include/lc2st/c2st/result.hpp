#ifndef LC2ST_C2ST_RESULT_HPP
#define LC2ST_C2ST_RESULT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lc2st/classifiers/factory.hpp"
#include "lc2st/core/io.hpp"

namespace lc2st {

/// Classifiers fitted under the null, with the stream that fitted each one.
struct NullEnsemble {
    std::vector<ClassifierPtr> classifiers;
    std::string provenance; // "permutation" or "nf-resampled"
    std::vector<std::uint64_t> stream_ids;
    std::uint64_t seed = 0;
    Eigen::Index n_cal = 0;

    std::size_t size() const noexcept { return classifiers.size(); }
    bool empty() const noexcept { return classifiers.empty(); }

    /// Member checkpoints; with `with_models` false only the seed ledger.
    nlohmann::json to_json(bool with_models = true) const {
        nlohmann::json j{{"provenance", provenance}, {"seed", seed}, {"n_cal", n_cal}, {"stream_ids", stream_ids}};
        if (with_models) {
            j["classifiers"] = nlohmann::json::array();
            for (const auto& c : classifiers) {
                j["classifiers"].push_back(c->to_json());
            }
        }
        return j;
    }

    static NullEnsemble from_json(const nlohmann::json& j) {
        NullEnsemble e;
        e.provenance = j.at("provenance").get<std::string>();
        e.seed = j.at("seed").get<std::uint64_t>();
        e.n_cal = j.value("n_cal", Eigen::Index{0});
        e.stream_ids = j.at("stream_ids").get<std::vector<std::uint64_t>>();
        for (const auto& c : j.at("classifiers")) {
            e.classifiers.push_back(classifier_from_json(c));
        }
        if (e.classifiers.size() != e.stream_ids.size()) {
            throw ParseError("null ensemble: classifier and stream-id counts differ");
        }
        return e;
    }
};

struct TestResult {
    std::string method;
    Vector x_o;
    double statistic = 0.0;
    std::optional<double> p_value; // absent when no null ensemble was supplied
    std::vector<double> null_statistics;
    Eigen::Index n_v = 0;
    std::size_t n_h = 0;
    nlohmann::json seeds = nlohmann::json::object();

    bool rejected(double alpha) const { return p_value.has_value() && *p_value < alpha; }

    nlohmann::json to_json() const {
        return nlohmann::json{{"method", method},
                              {"x_o", vector_to_json(x_o)},
                              {"statistic", statistic},
                              {"p_value", p_value ? nlohmann::json(*p_value) : nlohmann::json(nullptr)},
                              {"null_statistics", null_statistics},
                              {"n_v", n_v},
                              {"n_h", n_h},
                              {"seeds", seeds}};
    }

    static TestResult from_json(const nlohmann::json& j) {
        TestResult r;
        r.method = j.at("method").get<std::string>();
        r.x_o = vector_from_json(j.at("x_o"));
        r.statistic = j.at("statistic").get<double>();
        if (!j.at("p_value").is_null()) {
            r.p_value = j.at("p_value").get<double>();
        }
        r.null_statistics = j.at("null_statistics").get<std::vector<double>>();
        r.n_v = j.at("n_v").get<Eigen::Index>();
        r.n_h = j.at("n_h").get<std::size_t>();
        r.seeds = j.value("seeds", nlohmann::json::object());
        return r;
    }
};

} // namespace lc2st

#endif
