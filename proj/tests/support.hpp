// Shared helpers for the unit tests.
#ifndef LC2ST_TESTS_SUPPORT_HPP
#define LC2ST_TESTS_SUPPORT_HPP

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "lc2st/lc2st.hpp"

namespace lc2st::testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lc2st_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

struct GradCheck {
    double worst = 0.0;   // relative error at step 1e-5 over components the quotient resolves
    int excused = 0;      // components where only another step agrees (kink or rounding floor)
    Eigen::Index checked = 0;
};

/// Central differences at step 1e-5 against an analytic gradient, relative
/// error |a - fd| / (|a| + 1e-8). A component that misses the tolerance is
/// excused only when a step from 1e-3 to 1e-7 agrees within it: a rectifier
/// kink inside +-1e-5, or a gradient near 1e-8 where rounding in the quotient
/// dominates. Anything else counts toward `worst`.
template <class LossFn>
GradCheck grad_check(Vector params, const Vector& analytic, LossFn&& loss, double tolerance = 1e-4) {
    const auto central = [&](Eigen::Index k, double h) {
        const double saved = params[k];
        params[k] = saved + h;
        const double up = loss(params);
        params[k] = saved - h;
        const double down = loss(params);
        params[k] = saved;
        return (up - down) / (2.0 * h);
    };
    const auto rel = [&](Eigen::Index k, double fd) { return std::abs(analytic[k] - fd) / (std::abs(analytic[k]) + 1e-8); };
    GradCheck out;
    out.checked = params.size();
    for (Eigen::Index k = 0; k < params.size(); ++k) {
        const double e = rel(k, central(k, 1e-5));
        if (e <= tolerance) {
            out.worst = std::max(out.worst, e);
            continue;
        }
        bool agrees = false;
        for (double h : {1e-3, 1e-4, 1e-6, 1e-7}) {
            agrees = agrees || rel(k, central(k, h)) <= tolerance;
        }
        if (agrees) {
            ++out.excused;
        } else {
            out.worst = std::max(out.worst, e);
        }
    }
    return out;
}

inline std::vector<double> column(const Matrix& m, Eigen::Index c) {
    std::vector<double> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out[static_cast<std::size_t>(i)] = m(i, c);
    }
    return out;
}

/// Largest |mean_j - target_j| measured in standard errors.
inline double mean_z(const Matrix& draws, const Vector& target, const Vector& sd) {
    const double n = static_cast<double>(draws.rows());
    const RowVector mean = draws.colwise().mean();
    double worst = 0.0;
    for (Eigen::Index j = 0; j < draws.cols(); ++j) {
        worst = std::max(worst, std::abs(mean(j) - target(j)) / (sd(j) / std::sqrt(n)));
    }
    return worst;
}

/// Largest deviation of the sample covariance from cov_target in units of
/// the Gaussian standard error of each entry.
inline double cov_z(const Matrix& draws, const Matrix& cov_target) {
    const double n = static_cast<double>(draws.rows());
    const Matrix centered = draws.rowwise() - draws.colwise().mean();
    const Matrix cov = centered.transpose() * centered / (n - 1.0);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        for (Eigen::Index j = 0; j < cov.cols(); ++j) {
            const double se = std::sqrt((cov_target(i, j) * cov_target(i, j) + cov_target(i, i) * cov_target(j, j)) / n);
            worst = std::max(worst, std::abs(cov(i, j) - cov_target(i, j)) / se);
        }
    }
    return worst;
}

} // namespace lc2st::testing

#endif
