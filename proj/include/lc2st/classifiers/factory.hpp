#ifndef LC2ST_CLASSIFIERS_FACTORY_HPP
#define LC2ST_CLASSIFIERS_FACTORY_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

#include "lc2st/classifiers/mlp.hpp"
#include "lc2st/classifiers/qda.hpp"

namespace lc2st {

struct ClassifierConfig {
    std::string kind = "mlp"; // "qda" or "mlp"
    double ridge = kDefaultQdaRidge;
    MlpConfig mlp;

    void validate() const {
        if (kind != "qda" && kind != "mlp") {
            throw ConfigError("unknown classifier '" + kind + "' (expected qda or mlp)");
        }
    }
};

inline void to_json(nlohmann::json& j, const ClassifierConfig& c) {
    j = nlohmann::json{{"kind", c.kind}, {"ridge", c.ridge}, {"mlp", c.mlp}};
}

inline void from_json(const nlohmann::json& j, ClassifierConfig& c) {
    c = ClassifierConfig{};
    if (j.is_string()) {
        c.kind = j.get<std::string>();
    } else {
        if (j.contains("kind")) j.at("kind").get_to(c.kind);
        if (j.contains("ridge")) j.at("ridge").get_to(c.ridge);
        if (j.contains("mlp")) j.at("mlp").get_to(c.mlp);
    }
    c.validate();
}

/// Process-wide count of fit_classifier calls, used to audit how many
/// classifiers a procedure trains.
inline std::atomic<std::uint64_t>& fit_counter() {
    static std::atomic<std::uint64_t> count{0};
    return count;
}

inline ClassifierPtr fit_classifier(const ClassifierConfig& cfg, const LabeledPairDataset& data, RngStream rng) {
    cfg.validate();
    fit_counter().fetch_add(1, std::memory_order_relaxed);
    if (cfg.kind == "qda") {
        return std::make_shared<QdaModel>(qda_fit(data, cfg.ridge));
    }
    return std::make_shared<MlpModel>(mlp_fit(data, cfg.mlp, rng));
}

/// Rebuilds a fitted classifier from its checkpoint JSON.
inline ClassifierPtr classifier_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "qda") {
        return std::make_shared<QdaModel>(QdaModel::from_json(j));
    }
    if (kind == "mlp") {
        return std::make_shared<MlpModel>(MlpModel::from_json(j));
    }
    throw ParseError("classifier checkpoint has unsupported kind '" + kind + "'");
}

} // namespace lc2st

#endif
