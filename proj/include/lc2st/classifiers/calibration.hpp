#ifndef LC2ST_CLASSIFIERS_CALIBRATION_HPP
#define LC2ST_CLASSIFIERS_CALIBRATION_HPP

#include <optional>
#include <span>
#include <vector>

#include "lc2st/classifiers/classifier.hpp"
#include "lc2st/core/dataset.hpp"

namespace lc2st {

struct CalibrationBin {
    double lower = 0.0;
    double upper = 0.0;
    Eigen::Index count = 0;
    std::optional<double> mean_prob; // empty when the bin has no members
    std::optional<double> frequency;
};

/// Reliability table on equal-width probability bins. Labels need not be
/// balanced here, so synthetic Bernoulli labels can be checked directly.
inline std::vector<CalibrationBin> calibration_curve(const ProbClassifier& clf, const Matrix& features,
                                                     std::span<const int> labels, int bins) {
    if (bins < 2) {
        throw ConfigError("calibration_curve: need at least 2 bins");
    }
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw ConfigError("calibration_curve: label count does not match feature rows");
    }
    const Vector prob = clf.predict_proba(features);
    std::vector<double> sum_p(static_cast<std::size_t>(bins), 0.0);
    std::vector<double> sum_y(static_cast<std::size_t>(bins), 0.0);
    std::vector<Eigen::Index> count(static_cast<std::size_t>(bins), 0);
    for (Eigen::Index i = 0; i < prob.size(); ++i) {
        auto b = static_cast<int>(prob[i] * bins);
        b = std::clamp(b, 0, bins - 1);
        sum_p[static_cast<std::size_t>(b)] += prob[i];
        sum_y[static_cast<std::size_t>(b)] += labels[static_cast<std::size_t>(i)];
        ++count[static_cast<std::size_t>(b)];
    }
    std::vector<CalibrationBin> out(static_cast<std::size_t>(bins));
    for (int b = 0; b < bins; ++b) {
        auto& bin = out[static_cast<std::size_t>(b)];
        bin.lower = static_cast<double>(b) / bins;
        bin.upper = static_cast<double>(b + 1) / bins;
        bin.count = count[static_cast<std::size_t>(b)];
        if (bin.count > 0) {
            bin.mean_prob = sum_p[static_cast<std::size_t>(b)] / static_cast<double>(bin.count);
            bin.frequency = sum_y[static_cast<std::size_t>(b)] / static_cast<double>(bin.count);
        }
    }
    return out;
}

inline std::vector<CalibrationBin> calibration_curve(const ProbClassifier& clf, const LabeledPairDataset& data,
                                                     int bins) {
    return calibration_curve(clf, data.features(), data.labels(), bins);
}

} // namespace lc2st

#endif
