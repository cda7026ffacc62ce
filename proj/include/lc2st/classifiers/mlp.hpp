#ifndef LC2ST_CLASSIFIERS_MLP_HPP
#define LC2ST_CLASSIFIERS_MLP_HPP

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "lc2st/classifiers/classifier.hpp"
#include "lc2st/core/dataset.hpp"
#include "lc2st/nn/network.hpp"

namespace lc2st {

struct MlpConfig {
    int hidden_mult = 10;  // hidden width = hidden_mult * input dim
    int hidden_layers = 2;
    int batch_size = 100;
    double learning_rate = 1e-3;
    int max_epochs = 1000;
    int patience = 20;
    double holdout_fraction = 0.1;
};

inline void to_json(nlohmann::json& j, const MlpConfig& c) {
    j = nlohmann::json{{"hidden_mult", c.hidden_mult},     {"hidden_layers", c.hidden_layers},
                       {"batch_size", c.batch_size},       {"learning_rate", c.learning_rate},
                       {"max_epochs", c.max_epochs},       {"patience", c.patience},
                       {"holdout_fraction", c.holdout_fraction}};
}

inline void from_json(const nlohmann::json& j, MlpConfig& c) {
    c = MlpConfig{};
    if (j.contains("hidden_mult")) j.at("hidden_mult").get_to(c.hidden_mult);
    if (j.contains("hidden_layers")) j.at("hidden_layers").get_to(c.hidden_layers);
    if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
    if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
    if (j.contains("max_epochs")) j.at("max_epochs").get_to(c.max_epochs);
    if (j.contains("patience")) j.at("patience").get_to(c.patience);
    if (j.contains("holdout_fraction")) j.at("holdout_fraction").get_to(c.holdout_fraction);
}

/// Per-feature z-scoring with statistics frozen at fit time.
struct Standardizer {
    RowVector mean;
    RowVector scale;

    static Standardizer identity(int dim) { return {RowVector::Zero(dim), RowVector::Ones(dim)}; }

    static Standardizer fit(const Matrix& x) {
        Standardizer s;
        s.mean = x.colwise().mean();
        const Matrix centered = x.rowwise() - s.mean;
        const double denom = std::max<double>(1.0, static_cast<double>(x.rows() - 1));
        s.scale = (centered.colwise().squaredNorm() / denom).array().sqrt().matrix();
        for (Eigen::Index j = 0; j < s.scale.size(); ++j) {
            if (!(s.scale[j] > 1e-12)) {
                s.scale[j] = 1.0;
            }
        }
        return s;
    }

    Matrix apply(const Matrix& x) const {
        return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
    }
};

struct MlpDiagnostics {
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    double best_val_loss = std::numeric_limits<double>::quiet_NaN();
    double val_accuracy = std::numeric_limits<double>::quiet_NaN();
    int epochs = 0;
    Eigen::Index train_size = 0;
    Eigen::Index val_size = 0;
};

/// Rectifier MLP with a sigmoid head.
class MlpModel : public ProbClassifier {
public:
    MlpModel(nn::DenseNetwork net, Standardizer standardizer, MlpDiagnostics diagnostics = {})
        : net_(std::move(net)), standardizer_(std::move(standardizer)), diagnostics_(diagnostics) {
        if (net_.output_dim() != 1) {
            throw ConfigError("MlpModel: output layer width must be 1");
        }
    }

    /// Fresh network of the given hidden widths with identity standardization.
    static MlpModel initialized(int input_dim, const std::vector<int>& hidden, RngStream& rng) {
        std::vector<int> sizes{input_dim};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(1);
        nn::DenseNetwork net(sizes);
        net.init(rng);
        return MlpModel(std::move(net), Standardizer::identity(input_dim));
    }

    Vector logits(const Matrix& features) const { return net_.forward(standardizer_.apply(features)).col(0); }

    Vector predict_proba(const Matrix& features) const override {
        const Vector z = logits(features);
        Vector out(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            out[i] = std::isnan(z[i]) ? 0.5 : stable_sigmoid(z[i]);
        }
        return out;
    }

    int input_dim() const override { return net_.input_dim(); }
    std::string kind() const override { return "mlp"; }

    const nn::DenseNetwork& network() const noexcept { return net_; }
    nn::DenseNetwork& network() noexcept { return net_; }
    const Standardizer& standardizer() const noexcept { return standardizer_; }
    const MlpDiagnostics& diagnostics() const noexcept { return diagnostics_; }

    /// Mean binary cross-entropy on (features, labels) for the given flat
    /// parameters; with `grad`, also its gradient.
    double loss(const Vector& params, const Matrix& features, std::span<const int> labels, Vector* grad = nullptr) const {
        nn::DenseNetwork net = net_;
        net.params() = params;
        const Matrix x = standardizer_.apply(features);
        nn::DenseNetwork::Cache cache;
        const Matrix z = net.forward(x, cache);
        const double n = static_cast<double>(features.rows());
        double total = 0.0;
        Matrix dz(z.rows(), 1);
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double zi = z(i, 0);
            const double y = labels[static_cast<std::size_t>(i)];
            total += std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - y * zi;
            dz(i, 0) = (stable_sigmoid(zi) - y) / n;
        }
        if (grad) {
            *grad = Vector::Zero(params.size());
            net.backward(cache, dz, *grad);
        }
        return total / n;
    }

    nlohmann::json to_json() const override {
        return nlohmann::json{{"kind", kind()},
                              {"input_dim", input_dim()},
                              {"network", net_.to_json()},
                              {"standardizer",
                               {{"mean", vector_to_json(standardizer_.mean.transpose())},
                                {"scale", vector_to_json(standardizer_.scale.transpose())}}},
                              {"diagnostics",
                               {{"final_train_loss", diagnostics_.final_train_loss},
                                {"best_val_loss", diagnostics_.best_val_loss},
                                {"val_accuracy", diagnostics_.val_accuracy},
                                {"epochs", diagnostics_.epochs},
                                {"train_size", diagnostics_.train_size},
                                {"val_size", diagnostics_.val_size}}}};
    }

    static MlpModel from_json(const nlohmann::json& j) {
        Standardizer s;
        s.mean = vector_from_json(j.at("standardizer").at("mean")).transpose();
        s.scale = vector_from_json(j.at("standardizer").at("scale")).transpose();
        MlpDiagnostics d;
        if (j.contains("diagnostics")) {
            const auto& dj = j.at("diagnostics");
            const auto num = [&](const char* key) {
                return dj.contains(key) && dj.at(key).is_number() ? dj.at(key).get<double>()
                                                                   : std::numeric_limits<double>::quiet_NaN();
            };
            d.final_train_loss = num("final_train_loss");
            d.best_val_loss = num("best_val_loss");
            d.val_accuracy = num("val_accuracy");
            d.epochs = dj.value("epochs", 0);
            d.train_size = dj.value("train_size", Eigen::Index{0});
            d.val_size = dj.value("val_size", Eigen::Index{0});
        }
        return MlpModel(nn::DenseNetwork::from_json(j.at("network")), std::move(s), d);
    }

private:
    nn::DenseNetwork net_;
    Standardizer standardizer_;
    MlpDiagnostics diagnostics_;
};

/**
 * Minimizes mean binary cross-entropy with Adam on mini-batches, keeping the
 * parameters with the lowest held-out loss (early stopping with patience).
 * Fully determined by `rng`.
 */
inline MlpModel mlp_fit(const LabeledPairDataset& data, const MlpConfig& cfg, RngStream rng) {
    if (data.count(0) < 1 || data.count(1) < 1) {
        throw FitError("mlp_fit: each class needs at least one sample");
    }
    if (cfg.hidden_layers < 1 || cfg.hidden_mult < 1 || cfg.batch_size < 1) {
        throw ConfigError("mlp_fit: invalid architecture or batch size");
    }
    const int dim = data.dim();
    const Eigen::Index n = data.size();

    std::vector<std::size_t> order = rng.permutation(static_cast<std::size_t>(n));
    auto n_val = static_cast<Eigen::Index>(std::ceil(cfg.holdout_fraction * static_cast<double>(n)));
    if (n_val >= n) {
        n_val = 0;
    }
    std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
    std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

    const Standardizer standardizer = Standardizer::fit(data.features());
    const Matrix x_all = standardizer.apply(data.features());
    const auto gather = [&](const std::vector<std::size_t>& idx, Matrix& x, Vector& y) {
        x.resize(static_cast<Eigen::Index>(idx.size()), dim);
        y.resize(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            x.row(static_cast<Eigen::Index>(i)) = x_all.row(static_cast<Eigen::Index>(idx[i]));
            y[static_cast<Eigen::Index>(i)] = data.labels()[idx[i]];
        }
    };
    Matrix x_train, x_val;
    Vector y_train, y_val;
    gather(train_idx, x_train, y_train);
    gather(val_idx, x_val, y_val);

    std::vector<int> sizes{dim};
    for (int l = 0; l < cfg.hidden_layers; ++l) {
        sizes.push_back(cfg.hidden_mult * dim);
    }
    sizes.push_back(1);
    nn::DenseNetwork net(sizes);
    RngStream init_rng = rng.child(1);
    net.init(init_rng);

    const auto bce = [](const Matrix& z, const Vector& y, Matrix* dz) {
        double total = 0.0;
        const double n_rows = static_cast<double>(z.rows());
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            const double zi = z(i, 0);
            total += std::max(zi, 0.0) + std::log1p(std::exp(-std::abs(zi))) - y[i] * zi;
            if (dz) {
                (*dz)(i, 0) = (stable_sigmoid(zi) - y[i]) / n_rows;
            }
        }
        return total / n_rows;
    };

    nn::Adam adam(cfg.learning_rate);
    Vector grad(net.num_params());
    Vector best = net.params();
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    MlpDiagnostics diag;
    diag.train_size = x_train.rows();
    diag.val_size = x_val.rows();

    std::vector<std::size_t> batch_order(static_cast<std::size_t>(x_train.rows()));
    for (std::size_t i = 0; i < batch_order.size(); ++i) {
        batch_order[i] = i;
    }
    nn::DenseNetwork::Cache cache;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        rng.shuffle(batch_order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < batch_order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(batch_order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const auto bsz = static_cast<Eigen::Index>(stop - start);
            Matrix xb(bsz, dim);
            Vector yb(bsz);
            for (std::size_t i = start; i < stop; ++i) {
                xb.row(static_cast<Eigen::Index>(i - start)) = x_train.row(static_cast<Eigen::Index>(batch_order[i]));
                yb[static_cast<Eigen::Index>(i - start)] = y_train[static_cast<Eigen::Index>(batch_order[i])];
            }
            const Matrix z = net.forward(xb, cache);
            Matrix dz(bsz, 1);
            const double loss = bce(z, yb, &dz);
            if (!std::isfinite(loss)) {
                throw TrainingError("mlp_fit: loss diverged at epoch " + std::to_string(epoch),
                                    nlohmann::json{{"epoch", epoch},
                                                   {"last_train_loss", diag.final_train_loss},
                                                   {"best_val_loss", best_val}}
                                        .dump());
            }
            epoch_loss += loss * static_cast<double>(bsz);
            grad.setZero();
            net.backward(cache, dz, grad);
            adam.step(net.params(), grad);
        }
        diag.final_train_loss = epoch_loss / static_cast<double>(std::max<std::size_t>(1, batch_order.size()));
        diag.epochs = epoch + 1;
        if (!all_finite(net.params())) {
            throw TrainingError("mlp_fit: non-finite parameters after epoch " + std::to_string(epoch),
                                nlohmann::json{{"epoch", epoch}, {"last_train_loss", diag.final_train_loss}}.dump());
        }
        const double monitor = x_val.rows() > 0 ? bce(net.forward(x_val), y_val, nullptr) : diag.final_train_loss;
        if (monitor < best_val) {
            best_val = monitor;
            best = net.params();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    if (cfg.max_epochs > 0) {
        net.params() = best;
    }
    diag.best_val_loss = best_val;
    if (x_val.rows() > 0) {
        const Matrix z = net.forward(x_val);
        double correct = 0.0;
        for (Eigen::Index i = 0; i < z.rows(); ++i) {
            correct += (z(i, 0) > 0.0 ? 1.0 : 0.0) == y_val[i];
        }
        diag.val_accuracy = correct / static_cast<double>(z.rows());
    }
    return MlpModel(std::move(net), standardizer, diag);
}

/// Max relative error between backprop and central finite differences
/// (step 1e-5) of the mean cross-entropy on a batch.
inline double mlp_grad_check(const MlpModel& model, const Matrix& features, std::span<const int> labels) {
    if (features.rows() == 0) {
        throw ConfigError("mlp_grad_check: batch must be nonempty");
    }
    Vector analytic;
    model.loss(model.network().params(), features, labels, &analytic);
    return nn::max_relative_gradient_error(model.network().params(), analytic,
                                           [&](const Vector& p) { return model.loss(p, features, labels); });
}

} // namespace lc2st

#endif
