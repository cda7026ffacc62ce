#ifndef LC2ST_FLOWS_TRAIN_HPP
#define LC2ST_FLOWS_TRAIN_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "lc2st/flows/flow.hpp"

namespace lc2st {

struct NpeConfig {
    int batch_size = 100;
    double learning_rate = 1e-3;
    int max_epochs = 500;
    int patience = 20;
    double holdout_fraction = 0.1;
};

inline void to_json(nlohmann::json& j, const NpeConfig& c) {
    j = nlohmann::json{{"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"max_epochs", c.max_epochs},
                       {"patience", c.patience},
                       {"holdout_fraction", c.holdout_fraction}};
}

inline void from_json(const nlohmann::json& j, NpeConfig& c) {
    c = NpeConfig{};
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
    if (j.contains("max_epochs")) j.at("max_epochs").get_to(c.max_epochs);
    if (j.contains("patience")) j.at("patience").get_to(c.patience);
    if (j.contains("holdout_fraction")) j.at("holdout_fraction").get_to(c.holdout_fraction);
}

struct NpeTrace {
    std::vector<double> train_loss; // per epoch, mean NLL
    std::vector<double> val_loss;   // per epoch, held-out NLL
    int best_epoch = -1;
};

struct NpeResult {
    ConditionalFlow flow;
    NpeTrace trace;
};

/**
 * Maximum-likelihood training of the flow on joint samples (neural
 * posterior estimation): minimizes the mean of -log q(theta_n | x_n) with
 * Adam on shuffled mini-batches, holding out a fraction for early stopping,
 * and returns the parameters with the lowest held-out loss.
 */
inline NpeResult fit_npe(ConditionalFlow flow, const JointDataset& train, const NpeConfig& cfg, RngStream rng) {
    if (train.size() == 0) {
        throw ConfigError("fit_npe: training set is empty");
    }
    if (train.theta_dim() != flow.theta_dim() || train.x_dim() != flow.x_dim()) {
        throw ConfigError("fit_npe: dataset dimensions do not match the flow");
    }
    if (cfg.batch_size < 1 || cfg.max_epochs < 0) {
        throw ConfigError("fit_npe: invalid batch size or epoch count");
    }
    NpeTrace trace;
    if (cfg.max_epochs == 0) {
        return {std::move(flow), trace};
    }
    const Eigen::Index n = train.size();
    std::vector<std::size_t> order = rng.permutation(static_cast<std::size_t>(n));
    auto n_val = static_cast<Eigen::Index>(std::ceil(cfg.holdout_fraction * static_cast<double>(n)));
    if (n_val >= n) {
        n_val = 0;
    }
    const JointDataset val = train.rows(std::span<const std::size_t>(order.data(), static_cast<std::size_t>(n_val)));
    const JointDataset fit = train.rows(
        std::span<const std::size_t>(order.data() + n_val, static_cast<std::size_t>(n - n_val)));

    nn::Adam adam(cfg.learning_rate);
    Vector params = flow.params();
    Vector best = params;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    Vector grad;

    std::vector<std::size_t> idx(static_cast<std::size_t>(fit.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const auto fail = [&](const std::string& why, int epoch) {
        flow.set_params(best);
        nlohmann::json diag{{"epoch", epoch},
                            {"last_train_loss", trace.train_loss.empty() ? nlohmann::json(nullptr)
                                                                          : nlohmann::json(trace.train_loss.back())},
                            {"checkpoint", flow.to_json()}};
        throw TrainingError("fit_npe: " + why + " at epoch " + std::to_string(epoch), diag.dump());
    };

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(idx);
        double total = 0.0;
        for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(idx.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto bsz = static_cast<Eigen::Index>(stop - start);
            Matrix tb(bsz, fit.theta_dim());
            Matrix xb(bsz, fit.x_dim());
            for (std::size_t i = start; i < stop; ++i) {
                tb.row(static_cast<Eigen::Index>(i - start)) = fit.thetas().row(static_cast<Eigen::Index>(idx[i]));
                xb.row(static_cast<Eigen::Index>(i - start)) = fit.xs().row(static_cast<Eigen::Index>(idx[i]));
            }
            double loss = std::numeric_limits<double>::quiet_NaN();
            try {
                loss = flow.nll(tb, xb, &grad);
            } catch (const NumericError& e) {
                fail(e.what(), epoch);
            }
            if (!std::isfinite(loss) || !all_finite(grad)) {
                fail("non-finite loss", epoch);
            }
            total += loss * static_cast<double>(bsz);
            adam.step(params, grad);
            flow.set_params(params);
        }
        trace.train_loss.push_back(total / static_cast<double>(idx.size()));
        double monitor = trace.train_loss.back();
        if (val.size() > 0) {
            try {
                monitor = flow.nll(val.thetas(), val.xs());
            } catch (const NumericError&) {
                monitor = std::numeric_limits<double>::quiet_NaN();
            }
        }
        if (!std::isfinite(monitor)) {
            fail("non-finite held-out loss", epoch);
        }
        trace.val_loss.push_back(monitor);
        if (monitor < best_val) {
            best_val = monitor;
            best = params;
            trace.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    flow.set_params(best);
    return {std::move(flow), trace};
}

/// Max relative error of the NLL gradient against central differences.
inline double flow_grad_check(const ConditionalFlow& flow, const Matrix& thetas, const Matrix& xs) {
    Vector analytic;
    flow.nll(thetas, xs, &analytic);
    ConditionalFlow probe = flow;
    return nn::max_relative_gradient_error(flow.params(), analytic, [&](const Vector& p) {
        probe.set_params(p);
        return probe.nll(thetas, xs);
    });
}

} // namespace lc2st

#endif
