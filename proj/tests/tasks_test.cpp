#include <gtest/gtest.h>

#include <numbers>
#include <numeric>

#include "support.hpp"

namespace lc2st {
namespace {

using testing::column;
using testing::cov_z;
using testing::mean_z;

TEST(ConjugateTask, ClosedFormExamples) {
    const auto one = gaussian_conjugate_task(1, 1.0);
    const auto post1 = one->reference_posterior();
    const Vector x0 = Vector::Zero(1);
    EXPECT_NEAR(post1->mean(x0)(0), 0.0, 1e-15);
    // N(0, 1/2) log-density at 0.3.
    const double expected = -0.5 * std::log(2.0 * std::numbers::pi * 0.5) - 0.3 * 0.3 / (2.0 * 0.5);
    EXPECT_NEAR(post1->log_prob(Vector::Constant(1, 0.3), x0), expected, 1e-12);

    const auto two = gaussian_conjugate_task(2, 1.0);
    Vector x(2);
    x << 2, 0;
    EXPECT_NEAR((two->reference_posterior()->mean(x) - Vector::Unit(2, 0)).norm(), 0.0, 1e-15);

    EXPECT_THROW(gaussian_conjugate_task(2, 0.0), ConfigError);
    EXPECT_THROW(gaussian_conjugate_task(2, -1.0), ConfigError);
    EXPECT_THROW(gaussian_conjugate_task(0, 1.0), ConfigError);
}

TEST(ConjugateTask, PosteriorDrawsMatchClosedForm) {
    const auto task = gaussian_conjugate_task(2, 0.5);
    const Vector x = Vector::Ones(2);
    RngStream rng(17);
    const Matrix draws = task->reference_posterior()->sample(x, 100000, rng);
    // x / (1 + 0.25) and variance 0.25 / 1.25.
    const double var = 0.2;
    EXPECT_LT(mean_z(draws, Vector::Constant(2, 0.8), Vector::Constant(2, std::sqrt(var))), 3.0);
    EXPECT_LT(cov_z(draws, Matrix::Identity(2, 2) * var), 3.0);
}

TEST(ConjugateTask, SampleEachUsesRowwiseObservations) {
    const auto task = gaussian_conjugate_task(1, 1.0);
    Matrix xs(2, 1);
    xs << -100, 100;
    RngStream rng(1);
    const Matrix draws = task->reference_posterior()->sample_each(xs, rng);
    EXPECT_LT(draws(0, 0), -40);
    EXPECT_GT(draws(1, 0), 40);
}

TEST(GaussianShift, SigmaOneGivesIdenticalMoments) {
    RngStream rng(5);
    const auto [p, q] = gaussian_shift_samples({1.0, 2}, 100000, rng);
    EXPECT_LT(mean_z(p, Vector::Zero(2), Vector::Ones(2)), 3.0);
    EXPECT_LT(mean_z(q, Vector::Zero(2), Vector::Ones(2)), 3.0);
    EXPECT_LT(cov_z(p, Matrix::Identity(2, 2)), 3.0);
    EXPECT_LT(cov_z(q, Matrix::Identity(2, 2)), 3.0);
}

TEST(GaussianShift, QVarianceIsSigmaSquared) {
    RngStream rng(6);
    const auto samples = gaussian_shift_samples({2.0, 2}, 100000, rng);
    EXPECT_LT(cov_z(samples.second, Matrix::Identity(2, 2) * 4.0), 3.0);
    EXPECT_THROW(gaussian_shift_samples({0.0, 2}, 10, rng), ConfigError);
    EXPECT_EQ(gaussian_shift_samples({1.0, 3}, 0, rng).first.rows(), 0);
}

TEST(GaussianShift, LogDensitiesAgreeAtSigmaOne) {
    const GaussianShiftPair pair{1.0, 2};
    const Vector t = Vector::LinSpaced(2, -0.3, 1.7);
    EXPECT_DOUBLE_EQ(pair.log_p(t), pair.log_q(t));
    const GaussianShiftPair wide{2.0, 2};
    EXPECT_NEAR(wide.log_q(Vector::Zero(2)), -std::log(8.0 * std::numbers::pi), 1e-12);
}

/// Energy-distance statistic from a precomputed pooled distance matrix.
double energy_statistic(const Matrix& dist, const std::vector<std::size_t>& order, std::size_t n) {
    double xy = 0.0;
    double xx = 0.0;
    double yy = 0.0;
    for (std::size_t i = 0; i < 2 * n; ++i) {
        for (std::size_t j = 0; j < 2 * n; ++j) {
            const double dij = dist(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(order[j]));
            const bool a = i < n;
            const bool b = j < n;
            if (a && !b) {
                xy += dij;
            } else if (a && b) {
                xx += dij;
            } else if (!a && !b) {
                yy += dij;
            }
        }
    }
    const double nn = static_cast<double>(n * n);
    return 2.0 * xy / nn - xx / nn - yy / nn;
}

TEST(GaussianShift, EnergyDistanceIsNullAtSigmaOne) {
    constexpr std::size_t n = 60;
    constexpr int n_perm = 99;
    int passes = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        RngStream rng(seed, 77);
        const auto [p, q] = gaussian_shift_samples({1.0, 2}, n, rng);
        Matrix pooled(2 * n, 2);
        pooled << p, q;
        Matrix dist(2 * n, 2 * n);
        for (Eigen::Index i = 0; i < dist.rows(); ++i) {
            for (Eigen::Index j = 0; j < dist.cols(); ++j) {
                dist(i, j) = (pooled.row(i) - pooled.row(j)).norm();
            }
        }
        std::vector<std::size_t> order(2 * n);
        std::iota(order.begin(), order.end(), 0);
        const double observed = energy_statistic(dist, order, n);
        int extreme = 0;
        for (int k = 0; k < n_perm; ++k) {
            rng.shuffle(order);
            extreme += energy_statistic(dist, order, n) >= observed;
        }
        passes += (1.0 + extreme) / (1.0 + n_perm) > 0.01;
    }
    EXPECT_GE(passes, 98);
}

TEST(TwoMoons, PriorSupportAndLargeEpsIsPrior) {
    const auto task = two_moons_task(100.0, 1'000'000);
    RngStream rng(1);
    const Matrix prior = task->sample_prior(100000, rng);
    EXPECT_LE(prior.cwiseAbs().maxCoeff(), 1.0);
    const Matrix post = task->reference_posterior()->sample(Vector::Zero(2), 20000, rng);
    // Uniform on [-1, 1]: each marginal passes KS against the U(-1, 1) CDF.
    for (int j = 0; j < 2; ++j) {
        const auto ks = stats::ks_test(column(post, j), [](double v) { return std::clamp((v + 1.0) / 2.0, 0.0, 1.0); });
        EXPECT_GT(ks.p_value, 0.01);
    }
}

TEST(TwoMoons, CentralObservationIsBimodal) {
    const auto task = two_moons_task(0.05, 20'000'000);
    RngStream rng(3);
    const Matrix post = task->reference_posterior()->sample(Vector::Zero(2), 2000, rng);
    // Two-means along the data; start from the extremes of theta_0 + theta_1.
    const Vector proj = post.col(0) + post.col(1);
    Eigen::Index lo = 0;
    Eigen::Index hi = 0;
    proj.minCoeff(&lo);
    proj.maxCoeff(&hi);
    RowVector c[2] = {post.row(lo), post.row(hi)};
    std::vector<int> assign(static_cast<std::size_t>(post.rows()));
    for (int iter = 0; iter < 50; ++iter) {
        RowVector sum[2] = {RowVector::Zero(2), RowVector::Zero(2)};
        double cnt[2] = {0, 0};
        for (Eigen::Index i = 0; i < post.rows(); ++i) {
            const int k = (post.row(i) - c[0]).squaredNorm() <= (post.row(i) - c[1]).squaredNorm() ? 0 : 1;
            assign[static_cast<std::size_t>(i)] = k;
            sum[k] += post.row(i);
            cnt[k] += 1;
        }
        ASSERT_GT(cnt[0], 0);
        ASSERT_GT(cnt[1], 0);
        c[0] = sum[0] / cnt[0];
        c[1] = sum[1] / cnt[1];
    }
    double spread = 0.0;
    for (Eigen::Index i = 0; i < post.rows(); ++i) {
        spread += (post.row(i) - c[assign[static_cast<std::size_t>(i)]]).norm();
    }
    spread /= static_cast<double>(post.rows());
    EXPECT_GT((c[0] - c[1]).norm(), spread);
}

TEST(TwoMoons, TinyEpsExhaustsBudget) {
    const auto task = two_moons_task(1e-9, 10000);
    RngStream rng(1);
    EXPECT_THROW(task->reference_posterior()->sample(Vector::Zero(2), 10, rng), OracleUnavailable);
}

TEST(LinearUniform, WideBoxMatchesUntruncatedGaussian) {
    const auto task = gaussian_linear_uniform_task(10, -100.0, 100.0);
    RngStream rng(4);
    const Vector x = Vector::LinSpaced(10, -1.0, 1.0);
    const Matrix draws = task->reference_posterior()->sample(x, 100000, rng);
    const double var = GaussianLinearUniformTask::kNoiseVar;
    EXPECT_LT(mean_z(draws, x, Vector::Constant(10, std::sqrt(var))), 3.5);
    EXPECT_LT(cov_z(draws, Matrix::Identity(10, 10) * var), 4.0);
}

TEST(LinearUniform, DrawsStayInsideTheBox) {
    const auto task = gaussian_linear_uniform_task(10, -1.0, 1.0);
    RngStream rng(8);
    Vector x = Vector::Constant(10, 0.95);
    x(0) = -1.4;
    const Matrix draws = task->reference_posterior()->sample(x, 20000, rng);
    EXPECT_LE(draws.maxCoeff(), 1.0);
    EXPECT_GE(draws.minCoeff(), -1.0);
    // The truncated mean is pulled inward relative to x.
    EXPECT_GT(draws.col(0).mean(), -1.0);
    EXPECT_LT(draws.col(1).mean(), 0.95);
}

TEST(Mixture, PosteriorAtOriginIsSymmetricAndMatchesRejection) {
    const auto task = gaussian_mixture_task();
    const auto post = task->reference_posterior();
    RngStream rng(12);
    const Vector x0 = Vector::Zero(2);
    const Matrix draws = post->sample(x0, 100000, rng);
    Vector sd(2);
    sd << std::sqrt(stats::variance(column(draws, 0))), std::sqrt(stats::variance(column(draws, 1)));
    EXPECT_LT(mean_z(draws, Vector::Zero(2), sd), 3.0);

    // Independent oracle: accept prior draws with probability
    // likelihood(x0 | theta) / max likelihood.
    auto lik = [](const RowVector& t) {
        const double r2 = t.squaredNorm();
        return 0.5 * std::exp(-0.5 * r2) / (2.0 * std::numbers::pi) +
               0.5 * std::exp(-0.5 * r2 / 0.01) / (2.0 * std::numbers::pi * 0.01);
    };
    const double lik_max = lik(RowVector::Zero(2));
    std::vector<double> oracle0;
    RngStream orng(13);
    while (oracle0.size() < 3000) {
        const Matrix t = task->sample_prior(1, orng);
        if (orng.uniform() * lik_max < lik(t.row(0))) {
            oracle0.push_back(t(0, 0));
        }
    }
    std::vector<double> model0 = column(draws, 0);
    model0.resize(20000);
    EXPECT_GT(stats::ks_two_sample(model0, oracle0).p_value, 0.01);
}

TEST(Distort, IdentityPreservesBaseMarginals) {
    const auto task = gaussian_conjugate_task(2, 1.0);
    const auto base = task->reference_posterior();
    const auto same = distort(base, Vector::Zero(2), 1.0);
    EXPECT_TRUE(same->is_identity());
    const Vector x = Vector::Constant(2, 0.7);
    RngStream a(1);
    RngStream b(2);
    const Matrix from_base = base->sample(x, 10000, a);
    const Matrix from_same = same->sample(x, 10000, b);
    for (int j = 0; j < 2; ++j) {
        EXPECT_GT(stats::ks_two_sample(column(from_base, j), column(from_same, j)).p_value, 0.01);
    }
}

TEST(Distort, ScaleTwoQuadruplesVarianceAndShiftMovesMean) {
    const auto task = gaussian_conjugate_task(2, 1.0);
    const auto wide = distort(task->reference_posterior(), Vector::Constant(2, 0.5), 2.0);
    EXPECT_FALSE(wide->is_identity());
    const Vector x = Vector::Constant(2, 1.0);
    RngStream rng(3);
    const Matrix draws = wide->sample(x, 100000, rng);
    EXPECT_LT(cov_z(draws, Matrix::Identity(2, 2) * 2.0), 3.0); // 4 * 0.5
    EXPECT_LT(mean_z(draws, Vector::Constant(2, 1.0), Vector::Constant(2, std::sqrt(2.0))), 3.0);
    EXPECT_THROW(distort(task->reference_posterior(), Vector::Zero(2), 0.0), ConfigError);
    EXPECT_THROW(distort(task->reference_posterior(), Vector::Zero(3), 1.0), ConfigError);
}

TEST(Registry, EverySimulatorReturnsFiniteRowsOfWidthD) {
    for (const auto& name : task_names()) {
        const auto task = make_task(name);
        EXPECT_EQ(task->name(), name);
        RngStream rng(21);
        const JointDataset joint = task->sample_joint(10000, rng);
        EXPECT_EQ(joint.xs().cols(), task->x_dim());
        EXPECT_EQ(joint.thetas().cols(), task->theta_dim());
        EXPECT_TRUE(all_finite(joint.xs()));
        const Vector x_o = task->observation(5);
        EXPECT_EQ(x_o, task->observation(5));
        EXPECT_EQ(x_o.size(), task->x_dim());
    }
    EXPECT_THROW(make_task("slcp"), ConfigError);
}

TEST(Registry, ReferenceLogDensityIsFiniteOnReferenceDraws) {
    for (const std::string name : {"gaussian_conjugate", "gaussian_mixture", "gaussian_linear_uniform"}) {
        const auto task = make_task(name);
        const auto post = task->reference_posterior();
        ASSERT_TRUE(post->has_log_prob()) << name;
        const Vector x_o = task->observation(9);
        RngStream rng(2);
        const Matrix draws = post->sample(x_o, 500, rng);
        for (Eigen::Index i = 0; i < draws.rows(); ++i) {
            ASSERT_TRUE(std::isfinite(post->log_prob(draws.row(i).transpose(), x_o))) << name;
        }
    }
}

TEST(Registry, OptionsRoundTripThroughJson) {
    TaskOptions o;
    o.m = 3;
    o.noise_std = 0.25;
    o.eps = 0.1;
    const nlohmann::json j = o;
    const auto back = j.get<TaskOptions>();
    EXPECT_EQ(back.m, 3);
    EXPECT_EQ(back.noise_std, 0.25);
    EXPECT_EQ(make_task("gaussian_conjugate", back)->theta_dim(), 3);
}

} // namespace
} // namespace lc2st
