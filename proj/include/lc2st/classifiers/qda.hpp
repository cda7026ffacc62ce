#ifndef LC2ST_CLASSIFIERS_QDA_HPP
#define LC2ST_CLASSIFIERS_QDA_HPP

#include <array>
#include <cmath>
#include <span>

#include "lc2st/classifiers/classifier.hpp"
#include "lc2st/core/dataset.hpp"
#include "lc2st/core/io.hpp"

namespace lc2st {

/// Negative ridge selects the default 1e-6 * trace(Sigma) / dim per class.
inline constexpr double kDefaultQdaRidge = -1.0;

/**
 * Quadratic discriminant analysis: one Gaussian per class,
 *   d(w) = sigmoid(log pi_1 + log N(w; mu_1, S_1) - log pi_0 - log N(w; mu_0, S_0)).
 */
class QdaModel : public ProbClassifier {
public:
    /// Builds the classifier from explicit class parameters (index = label).
    QdaModel(std::array<Vector, 2> means, std::array<Matrix, 2> covariances, std::array<double, 2> priors)
        : means_(std::move(means)), covs_(std::move(covariances)), priors_(priors) {
        const Eigen::Index dim = means_[0].size();
        for (int k = 0; k < 2; ++k) {
            if (means_[k].size() != dim || covs_[k].rows() != dim || covs_[k].cols() != dim) {
                throw ConfigError("QdaModel: inconsistent parameter shapes");
            }
            if (!(priors_[k] > 0.0)) {
                throw FitError("QdaModel: class prior must be positive");
            }
            Eigen::LLT<Eigen::MatrixXd> llt(covs_[k]);
            if (llt.info() != Eigen::Success || !all_finite(Eigen::MatrixXd(llt.matrixL()))) {
                throw FitError("QdaModel: covariance of class " + std::to_string(k) +
                               " is not positive definite after regularization");
            }
            chol_[k] = llt.matrixL();
            log_det_[k] = 2.0 * chol_[k].diagonal().array().log().sum();
            if (!std::isfinite(log_det_[k])) {
                throw FitError("QdaModel: singular covariance for class " + std::to_string(k));
            }
        }
        const double total = priors_[0] + priors_[1];
        priors_[0] /= total;
        priors_[1] /= total;
    }

    Vector predict_proba(const Matrix& features) const override {
        const Vector l0 = class_log_density(0, features);
        const Vector l1 = class_log_density(1, features);
        const double prior_logit = std::log(priors_[1]) - std::log(priors_[0]);
        Vector out(features.rows());
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            const double logit = prior_logit + l1[i] - l0[i];
            // Huge inputs can make both log-densities -inf.
            out[i] = std::isnan(logit) ? 0.5 : stable_sigmoid(logit);
        }
        return out;
    }

    /// log N(w; mu_k, S_k) for each row.
    Vector class_log_density(int k, const Matrix& features) const {
        const Eigen::Index dim = means_[k].size();
        Eigen::MatrixXd centered = (features.rowwise() - means_[k].transpose()).transpose();
        chol_[k].triangularView<Eigen::Lower>().solveInPlace(centered);
        const Eigen::VectorXd maha = centered.colwise().squaredNorm().transpose();
        return (-0.5 * (static_cast<double>(dim) * kLogTwoPi + log_det_[k] + maha.array())).matrix();
    }

    int input_dim() const override { return static_cast<int>(means_[0].size()); }
    std::string kind() const override { return "qda"; }

    const Vector& mean(int k) const { return means_[k]; }
    const Matrix& covariance(int k) const { return covs_[k]; }
    double prior(int k) const { return priors_[k]; }

    nlohmann::json to_json() const override {
        nlohmann::json j{{"kind", kind()}, {"input_dim", input_dim()}};
        for (int k = 0; k < 2; ++k) {
            j["classes"].push_back(
                {{"mean", vector_to_json(means_[k])}, {"covariance", matrix_to_json(covs_[k])}, {"prior", priors_[k]}});
        }
        return j;
    }

    static QdaModel from_json(const nlohmann::json& j) {
        std::array<Vector, 2> means;
        std::array<Matrix, 2> covs;
        std::array<double, 2> priors{};
        for (int k = 0; k < 2; ++k) {
            const auto& c = j.at("classes").at(static_cast<std::size_t>(k));
            means[k] = vector_from_json(c.at("mean"));
            covs[k] = matrix_from_json(c.at("covariance"));
            priors[k] = c.at("prior").get<double>();
        }
        return QdaModel(std::move(means), std::move(covs), priors);
    }

private:
    std::array<Vector, 2> means_;
    std::array<Matrix, 2> covs_;
    std::array<double, 2> priors_;
    std::array<Eigen::MatrixXd, 2> chol_;
    std::array<double, 2> log_det_{};
};

/// Fits class means, unbiased covariances (plus ridge * I) and priors.
inline QdaModel qda_fit(const Matrix& features, std::span<const int> labels, double ridge = kDefaultQdaRidge) {
    const Eigen::Index dim = features.cols();
    if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
        throw ConfigError("qda_fit: label count does not match feature rows");
    }
    std::array<Eigen::Index, 2> counts{0, 0};
    for (int c : labels) {
        if (c != 0 && c != 1) {
            throw ConfigError("qda_fit: labels must be 0 or 1");
        }
        ++counts[c];
    }
    std::array<Vector, 2> means;
    std::array<Matrix, 2> covs;
    std::array<double, 2> priors{};
    for (int k = 0; k < 2; ++k) {
        if (counts[k] < dim + 1) {
            throw FitError("qda_fit: class " + std::to_string(k) + " has " + std::to_string(counts[k]) +
                           " samples, need at least " + std::to_string(dim + 1));
        }
        Matrix rows(counts[k], dim);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < features.rows(); ++i) {
            if (labels[static_cast<std::size_t>(i)] == k) {
                rows.row(r++) = features.row(i);
            }
        }
        means[k] = rows.colwise().mean().transpose();
        rows.rowwise() -= means[k].transpose();
        covs[k] = (rows.transpose() * rows) / static_cast<double>(counts[k] - 1);
        const double ridge_k = ridge < 0.0 ? 1e-6 * covs[k].trace() / static_cast<double>(dim) : ridge;
        covs[k].diagonal().array() += ridge_k;
        priors[k] = static_cast<double>(counts[k]);
    }
    return QdaModel(std::move(means), std::move(covs), priors);
}

inline QdaModel qda_fit(const LabeledPairDataset& data, double ridge = kDefaultQdaRidge) {
    return qda_fit(data.features(), data.labels(), ridge);
}

} // namespace lc2st

#endif
