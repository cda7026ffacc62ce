#ifndef LC2ST_NN_NETWORK_HPP
#define LC2ST_NN_NETWORK_HPP

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "lc2st/core/io.hpp"
#include "lc2st/core/rng.hpp"
#include "lc2st/core/types.hpp"

namespace lc2st::nn {

/**
 * Fully connected network with rectifier hidden layers and a linear output,
 * evaluated on row-batched inputs.
 *
 * All parameters live in one flat vector: for each layer the weight matrix
 * (fan_in x fan_out, row-major) followed by its bias. Optimizers and
 * finite-difference checks operate on that vector directly.
 */
class DenseNetwork {
public:
    struct Cache {
        std::vector<Matrix> activations; // input, then each layer's output
    };

    DenseNetwork() = default;

    explicit DenseNetwork(std::vector<int> sizes) : sizes_(std::move(sizes)) {
        if (sizes_.size() < 2) {
            throw ConfigError("DenseNetwork: need at least input and output sizes");
        }
        Eigen::Index total = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            if (sizes_[l] < 0 || sizes_[l + 1] < 1) {
                throw ConfigError("DenseNetwork: invalid layer size");
            }
            offsets_.push_back(total);
            total += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
        }
        params_ = Vector::Zero(total);
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases. With
    /// `zero_output`, the last layer starts at exactly zero.
    void init(RngStream& rng, bool zero_output = false) {
        for (std::size_t l = 0; l < num_layers(); ++l) {
            const int fan_in = sizes_[l];
            const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
            const Eigen::Index count = layer_param_count(l);
            for (Eigen::Index k = 0; k < count; ++k) {
                params_[offsets_[l] + k] = (zero_output && l + 1 == num_layers()) ? 0.0 : rng.uniform(-bound, bound);
            }
        }
    }

    std::size_t num_layers() const noexcept { return offsets_.size(); }
    int input_dim() const noexcept { return sizes_.front(); }
    int output_dim() const noexcept { return sizes_.back(); }
    const std::vector<int>& sizes() const noexcept { return sizes_; }
    Eigen::Index num_params() const noexcept { return params_.size(); }

    Vector& params() noexcept { return params_; }
    const Vector& params() const noexcept { return params_; }

    Eigen::Map<const Matrix> weight(std::size_t l) const {
        return {params_.data() + offsets_[l], sizes_[l], sizes_[l + 1]};
    }
    Eigen::Map<Matrix> weight(std::size_t l) { return {params_.data() + offsets_[l], sizes_[l], sizes_[l + 1]}; }

    Eigen::Map<const RowVector> bias(std::size_t l) const {
        return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
    }
    Eigen::Map<RowVector> bias(std::size_t l) {
        return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
    }

    Matrix forward(const Matrix& input) const {
        Matrix a = input;
        for (std::size_t l = 0; l < num_layers(); ++l) {
            Matrix z = a * weight(l);
            z.rowwise() += bias(l);
            if (l + 1 < num_layers()) {
                z = z.cwiseMax(0.0);
            }
            a = std::move(z);
        }
        return a;
    }

    Matrix forward(const Matrix& input, Cache& cache) const {
        cache.activations.clear();
        cache.activations.push_back(input);
        for (std::size_t l = 0; l < num_layers(); ++l) {
            Matrix z = cache.activations.back() * weight(l);
            z.rowwise() += bias(l);
            if (l + 1 < num_layers()) {
                z = z.cwiseMax(0.0);
            }
            cache.activations.push_back(std::move(z));
        }
        return cache.activations.back();
    }

    /// Accumulates dL/dparams into `grad` (same layout as params()) and
    /// returns dL/dinput, given dL/doutput for the cached forward pass.
    Matrix backward(const Cache& cache, const Matrix& grad_output, Eigen::Ref<Vector> grad) const {
        Matrix g = grad_output;
        for (std::size_t l = num_layers(); l-- > 0;) {
            const Matrix& a_in = cache.activations[l];
            Eigen::Map<Matrix> gw(grad.data() + offsets_[l], sizes_[l], sizes_[l + 1]);
            Eigen::Map<RowVector> gb(grad.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1],
                                     sizes_[l + 1]);
            gw.noalias() += a_in.transpose() * g;
            gb += g.colwise().sum();
            Matrix g_in = g * weight(l).transpose();
            if (l > 0) {
                // a_in is a rectifier output; its derivative is 1 where positive.
                g_in = g_in.cwiseProduct((a_in.array() > 0.0).cast<double>().matrix());
            }
            g = std::move(g_in);
        }
        return g;
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"sizes", sizes_}, {"params", vector_to_json(params_)}};
    }

    static DenseNetwork from_json(const nlohmann::json& j) {
        DenseNetwork net(j.at("sizes").get<std::vector<int>>());
        const Vector p = vector_from_json(j.at("params"));
        if (p.size() != net.num_params()) {
            throw ParseError("DenseNetwork: parameter count does not match sizes");
        }
        net.params_ = p;
        return net;
    }

private:
    Eigen::Index layer_param_count(std::size_t l) const {
        return static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }

    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;
    Vector params_;
};

/// Adaptive-moment optimizer over a flat parameter vector.
class Adam {
public:
    explicit Adam(double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(Vector& params, const Vector& grad) {
        if (m_.size() != params.size()) {
            m_ = Vector::Zero(params.size());
            v_ = Vector::Zero(params.size());
            t_ = 0;
        }
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    Vector m_;
    Vector v_;
    long t_ = 0;
};

/// Max over coordinates of |analytic - fd| / (|analytic| + 1e-8), with fd the
/// central difference of `loss` at step h.
template <typename LossFn>
double max_relative_gradient_error(Vector params, const Vector& analytic, LossFn&& loss, double h = 1e-5) {
    double worst = 0.0;
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + h;
        const double up = loss(params);
        params[k] = saved - h;
        const double down = loss(params);
        params[k] = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(analytic[k] - fd) / (std::abs(analytic[k]) + 1e-8));
    }
    return worst;
}

} // namespace lc2st::nn

#endif
