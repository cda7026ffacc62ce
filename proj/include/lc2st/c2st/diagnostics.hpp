#ifndef LC2ST_C2ST_DIAGNOSTICS_HPP
#define LC2ST_C2ST_DIAGNOSTICS_HPP

#include <algorithm>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lc2st/c2st/result.hpp"
#include "lc2st/core/stats.hpp"
#include "lc2st/flows/flow.hpp"

namespace lc2st {

struct PPPlotData {
    std::vector<double> levels;
    std::vector<double> cdf;
    std::vector<double> lower;
    std::vector<double> upper;
    double alpha = 0.05;

    /// Fraction of levels where lower <= cdf <= upper.
    double coverage() const {
        if (levels.empty()) {
            return 0.0;
        }
        std::size_t inside = 0;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            inside += (cdf[i] >= lower[i] && cdf[i] <= upper[i]) ? 1 : 0;
        }
        return static_cast<double>(inside) / static_cast<double>(levels.size());
    }

    std::string to_csv() const {
        std::ostringstream out;
        out << "level,cdf,lower,upper\n";
        for (std::size_t i = 0; i < levels.size(); ++i) {
            out << format_double(levels[i]) << ',' << format_double(cdf[i]) << ',' << format_double(lower[i]) << ','
                << format_double(upper[i]) << '\n';
        }
        return out.str();
    }
};

/// n equispaced levels from lo to hi inclusive (default 100 in [0.005, 0.995]).
inline std::vector<double> default_levels(int n = 100, double lo = 0.005, double hi = 0.995) {
    if (n < 1) {
        throw ConfigError("default_levels: need at least one level");
    }
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
    }
    return out;
}

namespace detail {

/// F(l) = mean I(d0 <= l) for each level, with d0 sorted ascending.
inline std::vector<double> empirical_cdf(std::vector<double> d0, const std::vector<double>& levels) {
    std::sort(d0.begin(), d0.end());
    std::vector<double> out(levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        const auto count = std::upper_bound(d0.begin(), d0.end(), levels[i]) - d0.begin();
        out[i] = static_cast<double>(count) / static_cast<double>(d0.size());
    }
    return out;
}

inline std::vector<double> class0_probabilities(const ProbClassifier& clf, const Matrix& features) {
    const Vector p = clf.predict_proba(features);
    std::vector<double> d0(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        d0[static_cast<std::size_t>(i)] = 1.0 - p[i];
    }
    return d0;
}

} // namespace detail

/**
 * Local PP-plot data: empirical CDF of the class-0 probabilities
 * d0 = 1 - d on the evaluation points, with a pointwise band from the
 * alpha/2 and 1 - alpha/2 quantiles of the null classifiers' CDFs.
 */
inline PPPlotData pp_plot(const ProbClassifier& main, const NullEnsemble& null, const Matrix& eval_features,
                          const std::vector<double>& levels, double alpha = 0.05) {
    if (eval_features.rows() == 0) {
        throw ConfigError("pp_plot: evaluation set is empty");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("pp_plot: alpha must be in (0, 1)");
    }
    for (double l : levels) {
        if (!(l > 0.0 && l < 1.0)) {
            throw ConfigError("pp_plot: levels must lie in (0, 1)");
        }
    }
    if (!std::is_sorted(levels.begin(), levels.end())) {
        throw ConfigError("pp_plot: levels must be sorted");
    }
    PPPlotData out;
    out.levels = levels;
    out.alpha = alpha;
    out.cdf = detail::empirical_cdf(detail::class0_probabilities(main, eval_features), levels);
    if (null.empty()) {
        out.lower = out.cdf;
        out.upper = out.cdf;
        return out;
    }
    std::vector<std::vector<double>> null_cdfs(null.size());
    parallel_for(null.size(), [&](std::size_t h) {
        null_cdfs[h] = detail::empirical_cdf(detail::class0_probabilities(*null.classifiers[h], eval_features), levels);
    });
    out.lower.resize(levels.size());
    out.upper.resize(levels.size());
    std::vector<double> column(null.size());
    for (std::size_t i = 0; i < levels.size(); ++i) {
        for (std::size_t h = 0; h < null.size(); ++h) {
            column[h] = null_cdfs[h][i];
        }
        std::sort(column.begin(), column.end());
        out.lower[i] = stats::quantile_sorted(column, alpha / 2.0);
        out.upper[i] = stats::quantile_sorted(column, 1.0 - alpha / 2.0);
    }
    // Quantiles of monotone functions are monotone; this only removes
    // floating-point noise from the interpolation.
    for (std::size_t i = 1; i < levels.size(); ++i) {
        out.lower[i] = std::max(out.lower[i], out.lower[i - 1]);
        out.upper[i] = std::max(out.upper[i], out.upper[i - 1]);
    }
    return out;
}

struct HeatmapCell {
    int dim_i = 0;
    int dim_j = 0;
    int bin_i = 0;
    int bin_j = 0;
    Eigen::Index count = 0;
    std::optional<double> mean_prob; // mean class-0 probability; empty bins are null
};

struct HeatmapData {
    std::vector<HeatmapCell> cells;

    std::string to_csv() const {
        std::ostringstream out;
        out << "dim_i,dim_j,bin_i,bin_j,count,mean_prob\n";
        for (const auto& c : cells) {
            out << c.dim_i << ',' << c.dim_j << ',' << c.bin_i << ',' << c.bin_j << ',' << c.count << ','
                << (c.mean_prob ? format_double(*c.mean_prob) : std::string("null")) << '\n';
        }
        return out.str();
    }
};

/**
 * Mean predicted class-0 probability per histogram bin of theta = T(Z; x_o),
 * for every 1-D marginal (dim_i == dim_j, bin_j == bin_i) and every pair
 * dim_i < dim_j. Bins span the range of the drawn thetas on each axis.
 */
inline HeatmapData probability_heatmap(const ProbClassifier& main, const ConditionalFlow& flow, const Vector& x_o,
                                       Eigen::Index n, int bins, RngStream rng) {
    if (bins < 2) {
        throw ConfigError("probability_heatmap: need at least 2 bins per axis");
    }
    if (n < 1) {
        throw ConfigError("probability_heatmap: need at least one sample");
    }
    const int m = flow.theta_dim();
    const Matrix z = rng.normal_matrix(n, m);
    const Matrix theta = flow.forward(z, Matrix(x_o.transpose().replicate(n, 1))).values;
    const std::vector<double> d0 = detail::class0_probabilities(main, pair_with(z, x_o));

    std::vector<std::vector<int>> bin_of(static_cast<std::size_t>(m), std::vector<int>(static_cast<std::size_t>(n)));
    for (int k = 0; k < m; ++k) {
        const double lo = theta.col(k).minCoeff();
        const double hi = theta.col(k).maxCoeff();
        const double width = hi > lo ? (hi - lo) / bins : 1.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const int b = static_cast<int>((theta(r, k) - lo) / width);
            bin_of[static_cast<std::size_t>(k)][static_cast<std::size_t>(r)] = std::clamp(b, 0, bins - 1);
        }
    }
    HeatmapData out;
    for (int i = 0; i < m; ++i) {
        for (int j = i; j < m; ++j) {
            const int bj_count = i == j ? 1 : bins;
            std::vector<double> sum(static_cast<std::size_t>(bins * bj_count), 0.0);
            std::vector<Eigen::Index> count(sum.size(), 0);
            for (Eigen::Index r = 0; r < n; ++r) {
                const int bi = bin_of[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)];
                const int bj = i == j ? 0 : bin_of[static_cast<std::size_t>(j)][static_cast<std::size_t>(r)];
                const auto cell = static_cast<std::size_t>(bi * bj_count + bj);
                sum[cell] += d0[static_cast<std::size_t>(r)];
                ++count[cell];
            }
            for (int bi = 0; bi < bins; ++bi) {
                for (int bj = 0; bj < bj_count; ++bj) {
                    const auto cell = static_cast<std::size_t>(bi * bj_count + bj);
                    HeatmapCell c{i, j, bi, i == j ? bi : bj, count[cell], std::nullopt};
                    if (c.count > 0) {
                        c.mean_prob = sum[cell] / static_cast<double>(c.count);
                    }
                    out.cells.push_back(c);
                }
            }
        }
    }
    return out;
}

} // namespace lc2st

#endif
