#ifndef LC2ST_FLOWS_FLOW_HPP
#define LC2ST_FLOWS_FLOW_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lc2st/core/dataset.hpp"
#include "lc2st/core/io.hpp"
#include "lc2st/nn/network.hpp"
#include "lc2st/tasks/task.hpp"

namespace lc2st {

inline constexpr double kLogScaleClamp = 5.0;

/**
 * One invertible map y = f(z; x) of a conditional flow, acting on row
 * batches. `xc` is the already standardized conditioning input, one row per
 * sample. The inverse pass can record what its backward pass needs.
 */
class FlowLayer {
public:
    struct Cache {
        nn::DenseNetwork::Cache net;
        Matrix out;          // transformed coordinates after the inverse map
        Matrix exp_neg_s;    // exp(-s) for the transformed coordinates
        Matrix clamp_active; // 1 where the raw log-scale was inside the clamp
    };

    virtual ~FlowLayer() = default;
    virtual std::string kind() const = 0;
    virtual std::unique_ptr<FlowLayer> clone() const = 0;

    /// z -> y in place; adds log|det dy/dz| per row to `logdet`.
    virtual void forward(Matrix& z, const Matrix& xc, Vector& logdet) const = 0;

    /// y -> z in place; adds log|det dz/dy| per row to `logdet`.
    virtual void inverse(Matrix& y, const Matrix& xc, Vector& logdet, Cache* cache) const = 0;

    /// Given dL/dz in `g` and dL/dlogdet per row, rewrites `g` to dL/dy and
    /// accumulates parameter gradients.
    virtual void backward_inverse(const Cache& /*cache*/, Matrix& /*g*/, const Vector& /*g_logdet*/,
                                  Eigen::Ref<Vector> /*grad*/) const {}

    virtual nn::DenseNetwork* network() { return nullptr; }
    const nn::DenseNetwork* network() const { return const_cast<FlowLayer*>(this)->network(); }

    virtual nlohmann::json to_json() const = 0;
};

namespace detail {

inline Matrix clamp_log_scale(const Matrix& raw, Matrix* active) {
    if (active) {
        *active = (raw.array().abs() < kLogScaleClamp).cast<double>().matrix();
    }
    return raw.cwiseMax(-kLogScaleClamp).cwiseMin(kLogScaleClamp);
}

} // namespace detail

/// Affine coupling: coordinates with mask 1 pass through and condition a
/// shift and clamped log-scale for the others.
class AffineCoupling : public FlowLayer {
public:
    AffineCoupling(std::vector<int> mask, int x_dim, nn::DenseNetwork net) : mask_(std::move(mask)), net_(std::move(net)) {
        for (int i = 0; i < static_cast<int>(mask_.size()); ++i) {
            (mask_[static_cast<std::size_t>(i)] ? kept_ : moved_).push_back(i);
        }
        if (kept_.empty() || moved_.empty()) {
            throw ConfigError("AffineCoupling: mask must keep and transform at least one coordinate each");
        }
        if (net_.input_dim() != static_cast<int>(kept_.size()) + x_dim ||
            net_.output_dim() != 2 * static_cast<int>(moved_.size())) {
            throw ConfigError("AffineCoupling: conditioner shape does not match mask and x dimension");
        }
    }

    /// Conditioner of `hidden` rectifier layers of width `width`; output
    /// layer zeroed unless `zero_output` is false.
    static AffineCoupling make(std::vector<int> mask, int x_dim, int width, int hidden, RngStream& rng,
                               bool zero_output = true) {
        const int kept = static_cast<int>(std::count(mask.begin(), mask.end(), 1));
        const int moved = static_cast<int>(mask.size()) - kept;
        std::vector<int> sizes{kept + x_dim};
        for (int l = 0; l < hidden; ++l) {
            sizes.push_back(width);
        }
        sizes.push_back(2 * moved);
        nn::DenseNetwork net(sizes);
        net.init(rng, zero_output);
        return AffineCoupling(std::move(mask), x_dim, std::move(net));
    }

    std::string kind() const override { return "affine_coupling"; }
    std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<AffineCoupling>(*this); }
    nn::DenseNetwork* network() override { return &net_; }
    const std::vector<int>& mask() const noexcept { return mask_; }

    void forward(Matrix& z, const Matrix& xc, Vector& logdet) const override {
        const Matrix out = net_.forward(conditioner_input(z, xc));
        const auto nb = static_cast<Eigen::Index>(moved_.size());
        const Matrix s = detail::clamp_log_scale(out.rightCols(nb), nullptr);
        for (Eigen::Index j = 0; j < nb; ++j) {
            const int c = moved_[static_cast<std::size_t>(j)];
            z.col(c) = (z.col(c).array() * s.col(j).array().exp() + out.col(j).array()).matrix();
        }
        logdet += s.rowwise().sum();
    }

    void inverse(Matrix& y, const Matrix& xc, Vector& logdet, Cache* cache) const override {
        const Matrix in = conditioner_input(y, xc);
        const Matrix out = cache ? net_.forward(in, cache->net) : net_.forward(in);
        const auto nb = static_cast<Eigen::Index>(moved_.size());
        const Matrix s = detail::clamp_log_scale(out.rightCols(nb), cache ? &cache->clamp_active : nullptr);
        const Matrix ens = (-s.array()).exp().matrix();
        Matrix zb(y.rows(), nb);
        for (Eigen::Index j = 0; j < nb; ++j) {
            const int c = moved_[static_cast<std::size_t>(j)];
            zb.col(j) = ((y.col(c) - out.col(j)).array() * ens.col(j).array()).matrix();
            y.col(c) = zb.col(j);
        }
        logdet -= s.rowwise().sum();
        if (cache) {
            cache->out = std::move(zb);
            cache->exp_neg_s = ens;
        }
    }

    void backward_inverse(const Cache& cache, Matrix& g, const Vector& g_logdet, Eigen::Ref<Vector> grad) const override {
        const auto nb = static_cast<Eigen::Index>(moved_.size());
        const auto na = static_cast<Eigen::Index>(kept_.size());
        Matrix g_out(g.rows(), 2 * nb);
        for (Eigen::Index j = 0; j < nb; ++j) {
            const int c = moved_[static_cast<std::size_t>(j)];
            const Eigen::ArrayXd gz = g.col(c).array();
            const Eigen::ArrayXd ens = cache.exp_neg_s.col(j).array();
            g_out.col(j) = (-gz * ens).matrix();
            const Eigen::ArrayXd gs = -gz * cache.out.col(j).array() - g_logdet.array();
            g_out.col(nb + j) = (gs * cache.clamp_active.col(j).array()).matrix();
            g.col(c) = (gz * ens).matrix();
        }
        const Matrix g_in = net_.backward(cache.net, g_out, grad);
        for (Eigen::Index j = 0; j < na; ++j) {
            g.col(kept_[static_cast<std::size_t>(j)]) += g_in.col(j);
        }
    }

    nlohmann::json to_json() const override {
        return nlohmann::json{{"kind", kind()}, {"mask", mask_}, {"network", net_.to_json()}};
    }

private:
    Matrix conditioner_input(const Matrix& v, const Matrix& xc) const {
        Matrix in(v.rows(), static_cast<Eigen::Index>(kept_.size()) + xc.cols());
        for (std::size_t j = 0; j < kept_.size(); ++j) {
            in.col(static_cast<Eigen::Index>(j)) = v.col(kept_[j]);
        }
        in.rightCols(xc.cols()) = xc;
        return in;
    }

    std::vector<int> mask_;
    std::vector<int> kept_;
    std::vector<int> moved_;
    nn::DenseNetwork net_;
};

/// y = z * exp(s(x)) + t(x) coordinate-wise; used when m = 1 and by the
/// exact affine flows.
class ElementwiseAffine : public FlowLayer {
public:
    ElementwiseAffine(int theta_dim, nn::DenseNetwork net) : m_(theta_dim), net_(std::move(net)) {
        if (net_.output_dim() != 2 * m_) {
            throw ConfigError("ElementwiseAffine: conditioner must output 2 * theta_dim values");
        }
    }

    static ElementwiseAffine make(int theta_dim, int x_dim, int width, int hidden, RngStream& rng,
                                  bool zero_output = true) {
        std::vector<int> sizes{x_dim};
        for (int l = 0; l < hidden; ++l) {
            sizes.push_back(width);
        }
        sizes.push_back(2 * theta_dim);
        nn::DenseNetwork net(sizes);
        net.init(rng, zero_output);
        return ElementwiseAffine(theta_dim, std::move(net));
    }

    std::string kind() const override { return "elementwise_affine"; }
    std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<ElementwiseAffine>(*this); }
    nn::DenseNetwork* network() override { return &net_; }

    void forward(Matrix& z, const Matrix& xc, Vector& logdet) const override {
        const Matrix out = net_.forward(xc);
        const Matrix s = detail::clamp_log_scale(out.rightCols(m_), nullptr);
        z = (z.array() * s.array().exp() + out.leftCols(m_).array()).matrix();
        logdet += s.rowwise().sum();
    }

    void inverse(Matrix& y, const Matrix& xc, Vector& logdet, Cache* cache) const override {
        const Matrix out = cache ? net_.forward(xc, cache->net) : net_.forward(xc);
        const Matrix s = detail::clamp_log_scale(out.rightCols(m_), cache ? &cache->clamp_active : nullptr);
        const Matrix ens = (-s.array()).exp().matrix();
        y = ((y - out.leftCols(m_)).array() * ens.array()).matrix();
        logdet -= s.rowwise().sum();
        if (cache) {
            cache->out = y;
            cache->exp_neg_s = ens;
        }
    }

    void backward_inverse(const Cache& cache, Matrix& g, const Vector& g_logdet, Eigen::Ref<Vector> grad) const override {
        Matrix g_out(g.rows(), 2 * m_);
        g_out.leftCols(m_) = -(g.array() * cache.exp_neg_s.array()).matrix();
        Matrix gs = -(g.array() * cache.out.array()).matrix();
        gs.colwise() -= g_logdet;
        g_out.rightCols(m_) = gs.cwiseProduct(cache.clamp_active);
        g = g.cwiseProduct(cache.exp_neg_s);
        net_.backward(cache.net, g_out, grad);
    }

    nlohmann::json to_json() const override {
        return nlohmann::json{{"kind", kind()}, {"theta_dim", m_}, {"network", net_.to_json()}};
    }

private:
    int m_;
    nn::DenseNetwork net_;
};

/// y[:, i] = z[:, perm[i]].
class PermutationLayer : public FlowLayer {
public:
    explicit PermutationLayer(std::vector<int> perm) : perm_(std::move(perm)) {
        std::vector<int> sorted = perm_;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < static_cast<int>(sorted.size()); ++i) {
            if (sorted[static_cast<std::size_t>(i)] != i) {
                throw ConfigError("PermutationLayer: not a permutation");
            }
        }
    }

    std::string kind() const override { return "permutation"; }
    std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<PermutationLayer>(*this); }
    const std::vector<int>& perm() const noexcept { return perm_; }

    void forward(Matrix& z, const Matrix&, Vector&) const override {
        Matrix y(z.rows(), z.cols());
        for (std::size_t i = 0; i < perm_.size(); ++i) {
            y.col(static_cast<Eigen::Index>(i)) = z.col(perm_[i]);
        }
        z = std::move(y);
    }

    void inverse(Matrix& y, const Matrix&, Vector&, Cache*) const override {
        Matrix z(y.rows(), y.cols());
        for (std::size_t i = 0; i < perm_.size(); ++i) {
            z.col(perm_[i]) = y.col(static_cast<Eigen::Index>(i));
        }
        y = std::move(z);
    }

    void backward_inverse(const Cache&, Matrix& g, const Vector&, Eigen::Ref<Vector>) const override {
        Matrix gy(g.rows(), g.cols());
        for (std::size_t i = 0; i < perm_.size(); ++i) {
            gy.col(static_cast<Eigen::Index>(i)) = g.col(perm_[i]);
        }
        g = std::move(gy);
    }

    nlohmann::json to_json() const override { return nlohmann::json{{"kind", kind()}, {"perm", perm_}}; }

private:
    std::vector<int> perm_;
};

/// Non-trainable y = scale * z + shift, used to map standardized parameters
/// back to data units.
class FixedAffine : public FlowLayer {
public:
    FixedAffine(RowVector scale, RowVector shift) : scale_(std::move(scale)), shift_(std::move(shift)) {
        if (scale_.size() != shift_.size() || !(scale_.array() > 0.0).all() || !all_finite(shift_)) {
            throw ConfigError("FixedAffine: scale must be positive and shapes must match");
        }
        log_det_ = scale_.array().log().sum();
    }

    std::string kind() const override { return "fixed_affine"; }
    std::unique_ptr<FlowLayer> clone() const override { return std::make_unique<FixedAffine>(*this); }

    void forward(Matrix& z, const Matrix&, Vector& logdet) const override {
        z = (z.array().rowwise() * scale_.array()).rowwise() + shift_.array();
        logdet.array() += log_det_;
    }

    void inverse(Matrix& y, const Matrix&, Vector& logdet, Cache*) const override {
        y = (y.array().rowwise() - shift_.array()).rowwise() / scale_.array();
        logdet.array() -= log_det_;
    }

    void backward_inverse(const Cache&, Matrix& g, const Vector&, Eigen::Ref<Vector>) const override {
        g = (g.array().rowwise() / scale_.array()).matrix();
    }

    nlohmann::json to_json() const override {
        return nlohmann::json{{"kind", kind()},
                              {"scale", vector_to_json(scale_.transpose())},
                              {"shift", vector_to_json(shift_.transpose())}};
    }

private:
    RowVector scale_;
    RowVector shift_;
    double log_det_ = 0.0;
};

inline std::unique_ptr<FlowLayer> flow_layer_from_json(const nlohmann::json& j, int theta_dim, int x_dim) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "affine_coupling") {
        return std::make_unique<AffineCoupling>(j.at("mask").get<std::vector<int>>(), x_dim,
                                                nn::DenseNetwork::from_json(j.at("network")));
    }
    if (kind == "elementwise_affine") {
        return std::make_unique<ElementwiseAffine>(theta_dim, nn::DenseNetwork::from_json(j.at("network")));
    }
    if (kind == "permutation") {
        return std::make_unique<PermutationLayer>(j.at("perm").get<std::vector<int>>());
    }
    if (kind == "fixed_affine") {
        return std::make_unique<FixedAffine>(vector_from_json(j.at("scale")).transpose(),
                                             vector_from_json(j.at("shift")).transpose());
    }
    throw ParseError("unknown flow layer kind '" + kind + "'");
}

/**
 * Conditional normalizing flow theta = T(z; x) with base N(0, I_m). Layers
 * are applied in order on the forward (sampling) pass and in reverse on the
 * inverse (density) pass. The conditioning input is z-scored with frozen
 * statistics before it reaches any conditioner.
 */
class ConditionalFlow : public ConditionalSampler {
public:
    ConditionalFlow(int theta_dim, int x_dim)
        : m_(theta_dim), d_(x_dim), x_mean_(RowVector::Zero(x_dim)), x_scale_(RowVector::Ones(x_dim)) {
        if (theta_dim < 1 || x_dim < 1) {
            throw ConfigError("ConditionalFlow: dimensions must be positive");
        }
    }

    ConditionalFlow(const ConditionalFlow& other)
        : m_(other.m_), d_(other.d_), x_mean_(other.x_mean_), x_scale_(other.x_scale_) {
        for (const auto& l : other.layers_) {
            layers_.push_back(l->clone());
        }
    }
    ConditionalFlow& operator=(const ConditionalFlow& other) {
        if (this != &other) {
            ConditionalFlow tmp(other);
            *this = std::move(tmp);
        }
        return *this;
    }
    ConditionalFlow(ConditionalFlow&&) noexcept = default;
    ConditionalFlow& operator=(ConditionalFlow&&) noexcept = default;

    int theta_dim() const override { return m_; }
    int x_dim() const noexcept { return d_; }
    std::size_t num_layers() const noexcept { return layers_.size(); }
    const FlowLayer& layer(std::size_t i) const { return *layers_.at(i); }

    void add_layer(std::unique_ptr<FlowLayer> layer) { layers_.push_back(std::move(layer)); }

    void set_x_standardization(RowVector mean, RowVector scale) {
        if (mean.size() != d_ || scale.size() != d_ || !(scale.array() > 0.0).all()) {
            throw ConfigError("ConditionalFlow: invalid conditioning standardization");
        }
        x_mean_ = std::move(mean);
        x_scale_ = std::move(scale);
    }
    const RowVector& x_mean() const noexcept { return x_mean_; }
    const RowVector& x_scale() const noexcept { return x_scale_; }

    struct Mapped {
        Matrix values;
        Vector log_det;
    };

    /// theta = T(z; x) row-wise with log|det dT/dz|.
    Mapped forward(const Matrix& z, const Matrix& xs) const {
        check_shapes(z, xs, "forward");
        const Matrix xc = standardize_x(xs);
        Mapped r{z, Vector::Zero(z.rows())};
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            layers_[i]->forward(r.values, xc, r.log_det);
            check_layer(r, i, "forward");
        }
        return r;
    }

    /// z = T^{-1}(theta; x) row-wise with log|det dT^{-1}/dtheta|.
    Mapped inverse(const Matrix& thetas, const Matrix& xs) const {
        check_shapes(thetas, xs, "inverse");
        const Matrix xc = standardize_x(xs);
        Mapped r{thetas, Vector::Zero(thetas.rows())};
        for (std::size_t i = layers_.size(); i-- > 0;) {
            layers_[i]->inverse(r.values, xc, r.log_det, nullptr);
            check_layer(r, i, "inverse");
        }
        return r;
    }

    Vector log_prob(const Matrix& thetas, const Matrix& xs) const {
        const Mapped r = inverse(thetas, xs);
        Vector lp(thetas.rows());
        for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
            lp[i] = std_normal_log_density(r.values.row(i)) + r.log_det[i];
        }
        if (!all_finite(lp)) {
            throw NumericError("flow log_prob: non-finite density");
        }
        return lp;
    }

    double log_prob(const Vector& theta, const Vector& x) const {
        return log_prob(Matrix(theta.transpose()), Matrix(x.transpose()))[0];
    }

    Matrix sample(const Vector& x, Eigen::Index n, RngStream& rng) const override {
        if (n < 0) {
            throw ConfigError("flow sample: n must be nonnegative");
        }
        if (n == 0) {
            return Matrix(0, m_);
        }
        const Matrix z = rng.normal_matrix(n, m_);
        return forward(z, Matrix(x.transpose().replicate(n, 1))).values;
    }

    Matrix sample_each(const Matrix& xs, RngStream& rng) const override {
        return forward(rng.normal_matrix(xs.rows(), m_), xs).values;
    }

    /// Number of trainable parameters across all conditioners.
    Eigen::Index num_params() const {
        Eigen::Index n = 0;
        for (const auto& l : layers_) {
            if (const auto* net = l->network()) {
                n += net->num_params();
            }
        }
        return n;
    }

    Vector params() const {
        Vector p(num_params());
        Eigen::Index off = 0;
        for (const auto& l : layers_) {
            if (const auto* net = l->network()) {
                p.segment(off, net->num_params()) = net->params();
                off += net->num_params();
            }
        }
        return p;
    }

    void set_params(const Vector& p) {
        if (p.size() != num_params()) {
            throw ConfigError("ConditionalFlow: parameter vector has wrong length");
        }
        Eigen::Index off = 0;
        for (auto& l : layers_) {
            if (auto* net = l->network()) {
                net->params() = p.segment(off, net->num_params());
                off += net->num_params();
            }
        }
    }

    /// Negative mean log q(theta | x) over the batch; with `grad`, its gradient
    /// with respect to params().
    double nll(const Matrix& thetas, const Matrix& xs, Vector* grad = nullptr) const {
        check_shapes(thetas, xs, "nll");
        const Matrix xc = standardize_x(xs);
        const auto n = static_cast<double>(thetas.rows());
        std::vector<FlowLayer::Cache> caches(grad ? layers_.size() : 0);
        Matrix z = thetas;
        Vector ld = Vector::Zero(thetas.rows());
        for (std::size_t i = layers_.size(); i-- > 0;) {
            layers_[i]->inverse(z, xc, ld, grad ? &caches[i] : nullptr);
        }
        double total = 0.0;
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            total += std_normal_log_density(z.row(r)) + ld[r];
        }
        const double loss = -total / n;
        if (grad) {
            grad->setZero(num_params());
            Matrix g = z / n;
            const Vector g_ld = Vector::Constant(z.rows(), -1.0 / n);
            std::vector<Eigen::Index> offsets(layers_.size(), 0);
            Eigen::Index off = 0;
            for (std::size_t i = 0; i < layers_.size(); ++i) {
                offsets[i] = off;
                if (const auto* net = layers_[i]->network()) {
                    off += net->num_params();
                }
            }
            for (std::size_t i = 0; i < layers_.size(); ++i) {
                const auto* net = layers_[i]->network();
                const Eigen::Index np = net ? net->num_params() : 0;
                layers_[i]->backward_inverse(caches[i], g, g_ld, grad->segment(offsets[i], np));
            }
        }
        return loss;
    }

    nlohmann::json to_json() const {
        nlohmann::json layers = nlohmann::json::array();
        for (const auto& l : layers_) {
            layers.push_back(l->to_json());
        }
        return nlohmann::json{{"theta_dim", m_},
                              {"x_dim", d_},
                              {"x_mean", vector_to_json(x_mean_.transpose())},
                              {"x_scale", vector_to_json(x_scale_.transpose())},
                              {"layers", layers}};
    }

    static ConditionalFlow from_json(const nlohmann::json& j) {
        ConditionalFlow f(j.at("theta_dim").get<int>(), j.at("x_dim").get<int>());
        f.set_x_standardization(vector_from_json(j.at("x_mean")).transpose(),
                                vector_from_json(j.at("x_scale")).transpose());
        for (const auto& lj : j.at("layers")) {
            f.add_layer(flow_layer_from_json(lj, f.m_, f.d_));
        }
        return f;
    }

private:
    Matrix standardize_x(const Matrix& xs) const {
        return ((xs.rowwise() - x_mean_).array().rowwise() / x_scale_.array()).matrix();
    }

    void check_shapes(const Matrix& v, const Matrix& xs, const char* what) const {
        if (v.cols() != m_ || xs.cols() != d_ || v.rows() != xs.rows()) {
            throw ConfigError(std::string("flow ") + what + ": expected " + std::to_string(m_) + " parameter and " +
                              std::to_string(d_) + " observation columns with matching rows");
        }
    }

    void check_layer(const Mapped& r, std::size_t i, const char* pass) const {
        if (!all_finite(r.values) || !all_finite(r.log_det)) {
            throw NumericError(std::string("flow ") + pass + ": non-finite output at layer " + std::to_string(i) + " (" +
                               layers_[i]->kind() + ")");
        }
    }

    int m_;
    int d_;
    RowVector x_mean_;
    RowVector x_scale_;
    std::vector<std::unique_ptr<FlowLayer>> layers_;
};

struct FlowConfig {
    int layers = 5;
    int hidden_width = 64;
    int hidden_layers = 2;
    bool zero_init = true;   // zero conditioner heads so the untrained flow is a permutation
    bool standardize = true; // z-score theta and x from the training data
};

inline void to_json(nlohmann::json& j, const FlowConfig& c) {
    j = nlohmann::json{{"layers", c.layers},
                       {"hidden_width", c.hidden_width},
                       {"hidden_layers", c.hidden_layers},
                       {"zero_init", c.zero_init},
                       {"standardize", c.standardize}};
}

inline void from_json(const nlohmann::json& j, FlowConfig& c) {
    c = FlowConfig{};
    if (j.contains("layers")) j.at("layers").get_to(c.layers);
    if (j.contains("hidden_width")) j.at("hidden_width").get_to(c.hidden_width);
    if (j.contains("hidden_layers")) j.at("hidden_layers").get_to(c.hidden_layers);
    if (j.contains("zero_init")) j.at("zero_init").get_to(c.zero_init);
    if (j.contains("standardize")) j.at("standardize").get_to(c.standardize);
}

/**
 * K coupling blocks with alternating half masks. Between blocks a fixed
 * permutation shuffles coordinates within each half, so the alternation is
 * preserved. For m = 1 a single element-wise affine layer is used. With
 * `data`, theta and x standardization are taken from it.
 */
inline ConditionalFlow build_flow(int theta_dim, int x_dim, const FlowConfig& cfg, RngStream rng,
                                  const JointDataset* data = nullptr) {
    if (cfg.layers < 1 || cfg.hidden_width < 1 || cfg.hidden_layers < 1) {
        throw ConfigError("build_flow: layers, hidden width and hidden layers must be positive");
    }
    ConditionalFlow flow(theta_dim, x_dim);
    if (theta_dim == 1) {
        flow.add_layer(std::make_unique<ElementwiseAffine>(
            ElementwiseAffine::make(1, x_dim, cfg.hidden_width, cfg.hidden_layers, rng, cfg.zero_init)));
    } else {
        const int half = theta_dim / 2;
        for (int k = 0; k < cfg.layers; ++k) {
            std::vector<int> mask(static_cast<std::size_t>(theta_dim), 0);
            for (int i = 0; i < theta_dim; ++i) {
                const bool first_half = i < half;
                mask[static_cast<std::size_t>(i)] = (k % 2 == 0) == first_half ? 1 : 0;
            }
            flow.add_layer(std::make_unique<AffineCoupling>(
                AffineCoupling::make(mask, x_dim, cfg.hidden_width, cfg.hidden_layers, rng, cfg.zero_init)));
            if (k + 1 < cfg.layers) {
                std::vector<int> perm(static_cast<std::size_t>(theta_dim));
                std::iota(perm.begin(), perm.end(), 0);
                rng.shuffle(std::span<int>(perm.data(), static_cast<std::size_t>(half)));
                rng.shuffle(std::span<int>(perm.data() + half, static_cast<std::size_t>(theta_dim - half)));
                flow.add_layer(std::make_unique<PermutationLayer>(std::move(perm)));
            }
        }
    }
    if (data && cfg.standardize && data->size() >= 2) {
        const auto scale_of = [](const Matrix& v) {
            RowVector mean = v.colwise().mean();
            RowVector sd = ((v.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(v.rows() - 1))
                               .array()
                               .sqrt()
                               .matrix();
            for (Eigen::Index j = 0; j < sd.size(); ++j) {
                if (!(sd[j] > 1e-12)) {
                    sd[j] = 1.0;
                }
            }
            return std::pair{mean, sd};
        };
        const auto [xm, xs] = scale_of(data->xs());
        flow.set_x_standardization(xm, xs);
        const auto [tm, ts] = scale_of(data->thetas());
        flow.add_layer(std::make_unique<FixedAffine>(ts, tm));
    }
    return flow;
}

/**
 * Exact conditional affine flow theta = A x + b + exp(log_scale) * z with a
 * diagonal scale. The map t(x) = A x + b is encoded in a one-hidden-layer
 * rectifier conditioner through x = relu(x) - relu(-x).
 */
inline ConditionalFlow make_affine_flow(const Matrix& A, const Vector& b, const Vector& log_scale) {
    const auto m = static_cast<int>(A.rows());
    const auto d = static_cast<int>(A.cols());
    if (b.size() != m || log_scale.size() != m) {
        throw ConfigError("make_affine_flow: shape mismatch");
    }
    nn::DenseNetwork net({d, 2 * d, 2 * m});
    auto w1 = net.weight(0);
    w1.setZero();
    w1.leftCols(d) = Eigen::MatrixXd::Identity(d, d);
    w1.rightCols(d) = -Eigen::MatrixXd::Identity(d, d);
    net.bias(0).setZero();
    auto w2 = net.weight(1);
    w2.setZero();
    w2.block(0, 0, d, m) = A.transpose();
    w2.block(d, 0, d, m) = -A.transpose();
    net.bias(1).head(m) = b.transpose();
    net.bias(1).tail(m) = log_scale.transpose();
    ConditionalFlow flow(m, d);
    flow.add_layer(std::make_unique<ElementwiseAffine>(m, std::move(net)));
    return flow;
}

/**
 * Exact flow for the conjugate Gaussian task: z -> posterior mean + shift +
 * scale * posterior sd * z. scale = 1 and shift = 0 reproduce the posterior.
 */
inline ConditionalFlow make_conjugate_gaussian_flow(int m, double noise_std, double scale = 1.0, double shift = 0.0) {
    if (m < 1 || !(noise_std > 0.0) || !(scale > 0.0)) {
        throw ConfigError("make_conjugate_gaussian_flow: invalid arguments");
    }
    const double s2 = noise_std * noise_std;
    const Matrix A = Matrix::Identity(m, m) / (1.0 + s2);
    const double sd = std::sqrt(s2 / (1.0 + s2));
    return make_affine_flow(A, Vector::Constant(m, shift), Vector::Constant(m, std::log(scale * sd)));
}

/// Copy of the flow with an extra fixed latent rescaling z -> scale * z
/// applied before the original map.
inline ConditionalFlow with_latent_scale(const ConditionalFlow& flow, double scale) {
    ConditionalFlow out(flow.theta_dim(), flow.x_dim());
    out.set_x_standardization(flow.x_mean(), flow.x_scale());
    out.add_layer(std::make_unique<FixedAffine>(RowVector::Constant(flow.theta_dim(), scale),
                                                RowVector::Zero(flow.theta_dim())));
    for (std::size_t i = 0; i < flow.num_layers(); ++i) {
        out.add_layer(flow.layer(i).clone());
    }
    return out;
}

} // namespace lc2st

#endif
