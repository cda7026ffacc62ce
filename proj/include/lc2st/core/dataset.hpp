#ifndef LC2ST_CORE_DATASET_HPP
#define LC2ST_CORE_DATASET_HPP

#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lc2st/core/rng.hpp"
#include "lc2st/core/types.hpp"

namespace lc2st {

/// Paired (theta, x) draws from the joint p(theta, x), one pair per row.
class JointDataset {
public:
    JointDataset(int theta_dim, int x_dim) : thetas_(0, theta_dim), xs_(0, x_dim) { check_dims(); }

    JointDataset(Matrix thetas, Matrix xs) : thetas_(std::move(thetas)), xs_(std::move(xs)) {
        check_dims();
        if (thetas_.rows() != xs_.rows()) {
            throw ConfigError("JointDataset: thetas has " + std::to_string(thetas_.rows()) + " rows but xs has " +
                              std::to_string(xs_.rows()));
        }
        require_finite(thetas_, "JointDataset thetas");
        require_finite(xs_, "JointDataset xs");
    }

    const Matrix& thetas() const noexcept { return thetas_; }
    const Matrix& xs() const noexcept { return xs_; }
    Eigen::Index size() const noexcept { return thetas_.rows(); }
    int theta_dim() const noexcept { return static_cast<int>(thetas_.cols()); }
    int x_dim() const noexcept { return static_cast<int>(xs_.cols()); }

    JointDataset rows(std::span<const std::size_t> indices) const {
        Matrix t(static_cast<Eigen::Index>(indices.size()), thetas_.cols());
        Matrix x(static_cast<Eigen::Index>(indices.size()), xs_.cols());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = static_cast<Eigen::Index>(indices[i]);
            if (src >= size()) {
                throw ConfigError("JointDataset::rows: index out of range");
            }
            t.row(static_cast<Eigen::Index>(i)) = thetas_.row(src);
            x.row(static_cast<Eigen::Index>(i)) = xs_.row(src);
        }
        return JointDataset(std::move(t), std::move(x));
    }

    JointDataset head(Eigen::Index n) const {
        return JointDataset(Matrix(thetas_.topRows(n)), Matrix(xs_.topRows(n)));
    }

    friend bool operator==(const JointDataset& a, const JointDataset& b) {
        return a.thetas_.rows() == b.thetas_.rows() && a.thetas_.cols() == b.thetas_.cols() &&
               a.xs_.cols() == b.xs_.cols() && a.thetas_ == b.thetas_ && a.xs_ == b.xs_;
    }

private:
    void check_dims() const {
        if (thetas_.cols() < 1 || xs_.cols() < 1) {
            throw ConfigError("JointDataset: parameter and observation dimensions must be positive");
        }
    }

    Matrix thetas_;
    Matrix xs_;
};

/// Binary classification set {(W_n, C_n)} with near-balanced labels.
class LabeledPairDataset {
public:
    LabeledPairDataset() = default;

    LabeledPairDataset(Matrix features, std::vector<int> labels)
        : features_(std::move(features)), labels_(std::move(labels)) {
        if (static_cast<std::size_t>(features_.rows()) != labels_.size()) {
            throw ConfigError("LabeledPairDataset: feature rows and label count differ");
        }
        require_finite(features_, "LabeledPairDataset features");
        long ones = 0;
        for (int c : labels_) {
            if (c != 0 && c != 1) {
                throw ConfigError("LabeledPairDataset: labels must be 0 or 1");
            }
            ones += c;
        }
        const long zeros = static_cast<long>(labels_.size()) - ones;
        if (std::labs(zeros - ones) > 1) {
            throw ConfigError("LabeledPairDataset: unbalanced labels (" + std::to_string(zeros) + " vs " +
                              std::to_string(ones) + ")");
        }
    }

    /// Interleaves rows as W_2n = class0[n] (C=0), W_2n+1 = class1[n] (C=1).
    static LabeledPairDataset from_classes(const Matrix& class0, const Matrix& class1) {
        if (class0.cols() != class1.cols()) {
            throw ConfigError("LabeledPairDataset: class feature dimensions differ");
        }
        const Eigen::Index n0 = class0.rows();
        const Eigen::Index n1 = class1.rows();
        Matrix features(n0 + n1, class0.cols());
        std::vector<int> labels;
        labels.reserve(static_cast<std::size_t>(n0 + n1));
        Eigen::Index row = 0;
        for (Eigen::Index i = 0; i < std::max(n0, n1); ++i) {
            if (i < n0) {
                features.row(row++) = class0.row(i);
                labels.push_back(0);
            }
            if (i < n1) {
                features.row(row++) = class1.row(i);
                labels.push_back(1);
            }
        }
        return LabeledPairDataset(std::move(features), std::move(labels));
    }

    const Matrix& features() const noexcept { return features_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    Eigen::Index size() const noexcept { return features_.rows(); }
    int dim() const noexcept { return static_cast<int>(features_.cols()); }

    Eigen::Index count(int label) const {
        Eigen::Index n = 0;
        for (int c : labels_) {
            n += (c == label);
        }
        return n;
    }

    Matrix class_features(int label) const {
        Matrix out(count(label), features_.cols());
        Eigen::Index row = 0;
        for (std::size_t i = 0; i < labels_.size(); ++i) {
            if (labels_[i] == label) {
                out.row(row++) = features_.row(static_cast<Eigen::Index>(i));
            }
        }
        return out;
    }

    /// Same features with labels shuffled; counts are preserved.
    LabeledPairDataset with_permuted_labels(RngStream& rng) const {
        std::vector<int> shuffled = labels_;
        rng.shuffle(shuffled);
        return LabeledPairDataset(features_, std::move(shuffled));
    }

    /// Swaps the labels of rows 2i and 2i+1 with probability 1/2 each, the
    /// pair layout from_classes gives to equal-size classes. Each class keeps
    /// one row of every pair.
    LabeledPairDataset with_pair_swapped_labels(RngStream& rng) const {
        if (size() % 2 != 0) {
            throw ConfigError("LabeledPairDataset: pair swap needs an even number of rows");
        }
        std::vector<int> swapped = labels_;
        for (std::size_t i = 0; i + 1 < swapped.size(); i += 2) {
            if (swapped[i] == swapped[i + 1]) {
                throw ConfigError("LabeledPairDataset: rows " + std::to_string(i) + " and " + std::to_string(i + 1) +
                                  " are not a two-class pair");
            }
            if (rng.uniform() < 0.5) {
                std::swap(swapped[i], swapped[i + 1]);
            }
        }
        return LabeledPairDataset(features_, std::move(swapped));
    }

    LabeledPairDataset with_swapped_labels() const {
        std::vector<int> swapped = labels_;
        for (int& c : swapped) {
            c = 1 - c;
        }
        return LabeledPairDataset(features_, std::move(swapped));
    }

    LabeledPairDataset rows(std::span<const std::size_t> indices) const {
        Matrix f(static_cast<Eigen::Index>(indices.size()), features_.cols());
        std::vector<int> l(indices.size());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            f.row(static_cast<Eigen::Index>(i)) = features_.row(static_cast<Eigen::Index>(indices[i]));
            l[i] = labels_[indices[i]];
        }
        return LabeledPairDataset(std::move(f), std::move(l));
    }

private:
    Matrix features_;
    std::vector<int> labels_;
};

struct SplitConfig {
    std::size_t n_train = 0;
    std::size_t n_cal = 0;
    std::uint64_t seed = 0;
};

struct JointSplit {
    JointDataset train;
    JointDataset cal;
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> cal_indices;
};

/// Disjoint train/calibration subsets drawn uniformly without replacement.
inline JointSplit split_joint(const JointDataset& data, const SplitConfig& cfg) {
    const auto n = static_cast<std::size_t>(data.size());
    if (cfg.n_train + cfg.n_cal > n) {
        throw ConfigError("split_joint: n_train + n_cal = " + std::to_string(cfg.n_train + cfg.n_cal) +
                          " exceeds dataset size " + std::to_string(n));
    }
    RngStream rng(cfg.seed, 0);
    std::vector<std::size_t> idx = rng.permutation(n);
    std::vector<std::size_t> train(idx.begin(), idx.begin() + static_cast<long>(cfg.n_train));
    std::vector<std::size_t> cal(idx.begin() + static_cast<long>(cfg.n_train),
                                 idx.begin() + static_cast<long>(cfg.n_train + cfg.n_cal));
    return JointSplit{data.rows(train), data.rows(cal), std::move(train), std::move(cal)};
}

} // namespace lc2st

#endif
