#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "support.hpp"

namespace lc2st {
namespace {

JointDataset random_dataset(Eigen::Index n, int m, int d, RngStream& rng) {
    Matrix thetas = rng.normal_matrix(n, m);
    Matrix xs = rng.normal_matrix(n, d);
    // Spread values over many magnitudes so the decimal format is exercised.
    for (Eigen::Index i = 0; i < n; ++i) {
        thetas(i, 0) *= std::pow(10.0, static_cast<double>(rng.uniform_index(40)) - 20.0);
    }
    return JointDataset(std::move(thetas), std::move(xs));
}

TEST(SplitJoint, SizesAreRespectedAndIndicesDisjoint) {
    RngStream rng(3);
    const JointDataset data = random_dataset(10, 2, 2, rng);
    const JointSplit s = split_joint(data, {6, 4, 11});
    EXPECT_EQ(s.train.size(), 6);
    EXPECT_EQ(s.cal.size(), 4);
    std::set<std::size_t> all(s.train_indices.begin(), s.train_indices.end());
    all.insert(s.cal_indices.begin(), s.cal_indices.end());
    EXPECT_EQ(all.size(), 10u);
    for (std::size_t k = 0; k < s.cal_indices.size(); ++k) {
        EXPECT_EQ(s.cal.thetas().row(static_cast<Eigen::Index>(k)),
                  data.thetas().row(static_cast<Eigen::Index>(s.cal_indices[k])));
    }
}

TEST(SplitJoint, OversizedRequestIsConfigError) {
    RngStream rng(3);
    const JointDataset data = random_dataset(10, 2, 2, rng);
    EXPECT_THROW(split_joint(data, {8, 4, 0}), ConfigError);
}

TEST(SplitJoint, DeterministicAndSeedSensitive) {
    RngStream rng(5);
    const JointDataset data = random_dataset(100, 1, 1, rng);
    const JointSplit a = split_joint(data, {50, 30, 42});
    const JointSplit b = split_joint(data, {50, 30, 42});
    EXPECT_EQ(a.train_indices, b.train_indices);
    EXPECT_EQ(a.cal_indices, b.cal_indices);
    EXPECT_TRUE(a.train == b.train);

    std::set<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> distinct;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const JointSplit s = split_joint(data, {50, 30, seed});
        distinct.emplace(s.train_indices, s.cal_indices);
    }
    EXPECT_GE(distinct.size(), 99u);
}

TEST(DatasetIo, EmptyDatasetIsHeaderOnly) {
    const auto dir = testing::scratch_dir("io_empty");
    const JointDataset empty(2, 2);
    save_dataset(empty, dir / "d.csv");
    EXPECT_EQ(read_text_file(dir / "d.csv"), "theta_0,theta_1,x_0,x_1\n");
    const JointDataset back = load_dataset(dir / "d.csv");
    EXPECT_EQ(back.size(), 0);
    EXPECT_EQ(back.theta_dim(), 2);
    EXPECT_EQ(back.x_dim(), 2);
}

TEST(DatasetIo, SingleRowWritesPlainIntegers) {
    const auto dir = testing::scratch_dir("io_one");
    Matrix t(1, 2);
    t << 1, 2;
    Matrix x(1, 2);
    x << 3, 4;
    const JointDataset one(t, x);
    save_dataset(one, dir / "d.csv");
    EXPECT_EQ(read_text_file(dir / "d.csv"), "theta_0,theta_1,x_0,x_1\n1,2,3,4\n");
    EXPECT_TRUE(load_dataset(dir / "d.csv") == one);
}

TEST(DatasetIo, RaggedRowReportsLine) {
    std::istringstream in("theta_0,theta_1,x_0,x_1\n1,2,3,4\n1,2,3\n");
    try {
        read_dataset_csv(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
        EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    }
}

TEST(DatasetIo, MalformedHeaderAndCellsAreParseErrors) {
    std::istringstream bad_header("theta_0,y_0\n1,2\n");
    EXPECT_THROW(read_dataset_csv(bad_header), ParseError);
    std::istringstream bad_cell("theta_0,x_0\n1,abc\n");
    try {
        read_dataset_csv(bad_cell);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2);
        EXPECT_EQ(e.column(), 2);
    }
    std::istringstream nan_cell("theta_0,x_0\nnan,1\n");
    EXPECT_THROW(read_dataset_csv(nan_cell), ParseError);
}

TEST(DatasetIo, RoundTripIsExactForRandomShapes) {
    RngStream rng(2024);
    const auto dir = testing::scratch_dir("io_roundtrip");
    for (int trial = 0; trial < 25; ++trial) {
        const auto n = static_cast<Eigen::Index>(rng.uniform_index(1001));
        const int m = 1 + static_cast<int>(rng.uniform_index(10));
        const int d = 1 + static_cast<int>(rng.uniform_index(10));
        const JointDataset data = random_dataset(n, m, d, rng);
        save_dataset(data, dir / "d.csv");
        EXPECT_TRUE(load_dataset(dir / "d.csv") == data) << "n=" << n << " m=" << m << " d=" << d;
    }
}

TEST(DatasetIo, FormatDoubleRoundTripsEdgeValues) {
    const double values[] = {0.0, -0.0, 1e-310, std::numeric_limits<double>::max(),
                             std::numeric_limits<double>::min(), 0.1, -1.0 / 3.0};
    for (double v : values) {
        double back = 1.0;
        ASSERT_TRUE(parse_double(format_double(v), back)) << format_double(v);
        EXPECT_EQ(std::signbit(back), std::signbit(v));
        EXPECT_EQ(back, v);
    }
}

TEST(DatasetIo, MetadataSidecarRoundTrips) {
    const DatasetMetadata meta{2, 3, 17, 99, "gaussian_conjugate"};
    const nlohmann::json j = meta;
    EXPECT_EQ(j.at("N"), 17);
    const auto back = j.get<DatasetMetadata>();
    EXPECT_EQ(back.m, 2);
    EXPECT_EQ(back.d, 3);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.task_name, "gaussian_conjugate");
}

TEST(Datasets, ConstructorsRejectNonFinite) {
    Matrix t = Matrix::Zero(2, 1);
    Matrix x = Matrix::Zero(2, 1);
    t(1, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(JointDataset(t, x), ConfigError);
    t(1, 0) = std::numeric_limits<double>::infinity();
    EXPECT_THROW(JointDataset(t, x), ConfigError);
    EXPECT_THROW(LabeledPairDataset(t, std::vector<int>{0, 1}), ConfigError);
    EXPECT_THROW(JointDataset(Matrix::Zero(2, 1), Matrix::Zero(3, 1)), ConfigError);
}

TEST(Datasets, LabeledPairsMustBeBalancedBinary) {
    EXPECT_THROW(LabeledPairDataset(Matrix::Zero(3, 1), std::vector<int>{0, 0, 0}), ConfigError);
    EXPECT_THROW(LabeledPairDataset(Matrix::Zero(2, 1), std::vector<int>{0, 2}), ConfigError);
    EXPECT_NO_THROW(LabeledPairDataset(Matrix::Zero(3, 1), std::vector<int>{0, 1, 0}));

    Matrix c0 = Matrix::Constant(2, 1, -1.0);
    Matrix c1 = Matrix::Constant(2, 1, 1.0);
    const auto data = LabeledPairDataset::from_classes(c0, c1);
    EXPECT_EQ(data.count(0), 2);
    EXPECT_EQ(data.class_features(1), c1);
    const auto swapped = data.with_swapped_labels();
    EXPECT_EQ(swapped.class_features(0), c1);
    RngStream rng(1);
    const auto permuted = data.with_permuted_labels(rng);
    EXPECT_EQ(permuted.count(0), 2);
    EXPECT_EQ(permuted.features(), data.features());
}

TEST(Dataset, PairSwapKeepsOneRowOfEachPairPerClass) {
    RngStream rng(2);
    const Matrix c0 = rng.normal_matrix(500, 2);
    const Matrix c1 = rng.normal_matrix(500, 2);
    const auto data = LabeledPairDataset::from_classes(c0, c1);
    const auto swapped = data.with_pair_swapped_labels(rng);
    EXPECT_EQ(swapped.features(), data.features());
    int flips = 0;
    for (std::size_t i = 0; i < 1000; i += 2) {
        EXPECT_EQ(swapped.labels()[i] + swapped.labels()[i + 1], 1);
        flips += swapped.labels()[i] != data.labels()[i];
    }
    // Binomial(500, 1/2): mean 250, sd about 11.
    EXPECT_NEAR(flips, 250, 60);
    EXPECT_THROW(LabeledPairDataset(Matrix::Zero(3, 1), std::vector<int>{0, 1, 0}).with_pair_swapped_labels(rng),
                 ConfigError);
    EXPECT_THROW(LabeledPairDataset(Matrix::Zero(4, 1), std::vector<int>{0, 0, 1, 1}).with_pair_swapped_labels(rng),
                 ConfigError);
}

TEST(Rng, SameSeedAndStreamReproduce) {
    RngStream a(7, 3);
    RngStream b(7, 3);
    RngStream c(7, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto va = a.next();
        EXPECT_EQ(va, b.next());
        differs |= va != c.next();
    }
    EXPECT_TRUE(differs);
    EXPECT_EQ(RngStream(7, 3).child(5).next(), RngStream(7, 3).child(5).next());
    EXPECT_NE(RngStream(7, 3).child(5).next(), RngStream(7, 3).child(6).next());
}

TEST(Rng, UniformAndNormalHaveCorrectLaw) {
    RngStream rng(11);
    std::vector<double> u(20000);
    std::vector<double> z(20000);
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = rng.uniform();
        z[i] = rng.normal();
    }
    EXPECT_GT(stats::ks_uniform(u).p_value, 0.01);
    EXPECT_GT(stats::ks_test(z, stats::normal_cdf).p_value, 0.01);

    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
        ++counts[rng.uniform_index(5)];
    }
    for (int c : counts) {
        EXPECT_NEAR(c, 10000, 4 * std::sqrt(10000 * 0.8));
    }
    const auto perm = rng.permutation(50);
    EXPECT_EQ(std::set<std::size_t>(perm.begin(), perm.end()).size(), 50u);
}

TEST(Stats, QuantilesAndMoments) {
    std::vector<double> v{4, 1, 3, 2};
    EXPECT_DOUBLE_EQ(stats::mean(v), 2.5);
    EXPECT_DOUBLE_EQ(stats::variance(v), 5.0 / 3.0);
    EXPECT_DOUBLE_EQ(stats::median(v), 2.5);
    EXPECT_DOUBLE_EQ(stats::quantile(v, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(stats::quantile(v, 1.0), 4.0);
    EXPECT_DOUBLE_EQ(stats::normal_cdf(0.0), 0.5);
    EXPECT_NEAR(stats::normal_cdf(1.959963984540054), 0.975, 1e-12);
}

TEST(Stats, KolmogorovSurvivalMatchesTable) {
    // Classical critical values of the Kolmogorov distribution.
    EXPECT_NEAR(stats::kolmogorov_survival(1.3581), 0.05, 1e-4);
    EXPECT_NEAR(stats::kolmogorov_survival(1.6276), 0.01, 1e-4);
    EXPECT_NEAR(stats::kolmogorov_survival(0.0), 1.0, 1e-12);
}

TEST(Stats, KsDetectsShiftedSample) {
    RngStream rng(4);
    std::vector<double> a(2000);
    std::vector<double> b(2000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal() + 0.3;
    }
    EXPECT_LT(stats::ks_two_sample(a, b).p_value, 1e-6);
    EXPECT_LT(stats::ks_test(b, stats::normal_cdf).p_value, 1e-6);
}

TEST(Stats, RanksAndSpearman) {
    const std::vector<double> v{10, 20, 20, 5};
    EXPECT_EQ(stats::ranks(v), (std::vector<double>{2, 3.5, 3.5, 1}));
    const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> b{1, 4, 9, 16, 25, 36, 49, 64};
    EXPECT_DOUBLE_EQ(stats::spearman(a, b), 1.0);
    RngStream rng(9);
    const auto t = stats::spearman_permutation_test(a, b, 999, rng);
    EXPECT_LT(t.p_value, 0.01);
}

TEST(Parallel, VisitsEveryIndexOnceAndRethrows) {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) {
        EXPECT_EQ(h.load(), 1);
    }
    EXPECT_THROW(parallel_for(10, [](std::size_t i) {
                     if (i == 7) {
                         throw NumericError("boom");
                     }
                 }),
                 NumericError);
}

TEST(JsonHelpers, MatrixRoundTrip) {
    RngStream rng(1);
    const Matrix m = rng.normal_matrix(3, 4);
    EXPECT_EQ(matrix_from_json(matrix_to_json(m)), m);
    const Vector v = Vector::LinSpaced(5, -1, 1);
    EXPECT_EQ(vector_from_json(vector_to_json(v)), v);
}

} // namespace
} // namespace lc2st
