#ifndef LC2ST_CORE_TYPES_HPP
#define LC2ST_CORE_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>

#include "lc2st/core/error.hpp"

namespace lc2st {

/// Samples are stored one per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline constexpr double kLogTwoPi = 1.8378770664093454835606594728112; // log(2*pi)

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
    return m.derived().array().isFinite().all();
}

template <typename Derived>
void require_finite(const Eigen::DenseBase<Derived>& m, const std::string& what) {
    if (!all_finite(m)) {
        throw ConfigError(what + " contains NaN or Inf");
    }
}

/// Horizontal concatenation `[left, broadcast(right)]`, used to pair many
/// parameter draws with one observation.
inline Matrix pair_with(const Matrix& left, const Vector& right) {
    Matrix out(left.rows(), left.cols() + right.size());
    out.leftCols(left.cols()) = left;
    if (right.size() > 0) {
        out.rightCols(right.size()) = right.transpose().replicate(left.rows(), 1);
    }
    return out;
}

inline Matrix hconcat(const Matrix& left, const Matrix& right) {
    if (left.rows() != right.rows()) {
        throw ConfigError("hconcat: row count mismatch");
    }
    Matrix out(left.rows(), left.cols() + right.cols());
    out.leftCols(left.cols()) = left;
    out.rightCols(right.cols()) = right;
    return out;
}

inline double stable_sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// log N(x; 0, I) summed over coordinates.
inline double std_normal_log_density(const Eigen::Ref<const RowVector>& z) {
    return -0.5 * (static_cast<double>(z.size()) * kLogTwoPi + z.squaredNorm());
}

} // namespace lc2st

#endif
