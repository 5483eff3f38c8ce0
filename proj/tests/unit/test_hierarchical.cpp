#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "quantfolio/error.hpp"
#include "quantfolio/hierarchical.hpp"
#include "test_support.hpp"

namespace qf = quantfolio;
using qf::testing::gaussian_matrix;

namespace {

qf::Prior sigma_prior(const qf::Matrix& sigma, std::vector<std::string> names = {}) {
    qf::Prior p;
    p.sigma = sigma;
    p.mu = qf::Vector::Zero(sigma.rows());
    if (names.empty()) {
        for (Eigen::Index i = 0; i < sigma.rows(); ++i) names.push_back("A" + std::to_string(i));
    }
    p.scenarios.values = qf::Matrix(0, sigma.rows());
    p.scenarios.assets = std::move(names);
    return p;
}

qf::Matrix four_asset_sigma() {
    qf::Vector sd(4);
    sd << 0.2, 0.3, 0.1, 0.4;
    qf::Matrix c(4, 4);
    c << 1, .8, .1, .1,  //
        .8, 1, .1, .1,   //
        .1, .1, 1, .6,   //
        .1, .1, .6, 1;
    return sd.asDiagonal() * c * sd.asDiagonal();
}

/// Recursive bisection written directly from the definition, for a given leaf order.
void bisect_oracle(const qf::Matrix& s, std::vector<Eigen::Index> items, double scale, qf::Vector& w) {
    if (items.size() == 1) {
        w[items[0]] = scale;
        return;
    }
    auto cluster_var = [&](const std::vector<Eigen::Index>& idx) {
        qf::Vector iv(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) iv[static_cast<Eigen::Index>(i)] = 1.0 / s(idx[i], idx[i]);
        iv /= iv.sum();
        double v = 0.0;
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < idx.size(); ++j)
                v += iv[static_cast<Eigen::Index>(i)] * iv[static_cast<Eigen::Index>(j)] * s(idx[i], idx[j]);
        return v;
    };
    const auto half = items.size() / 2;
    std::vector<Eigen::Index> left(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<Eigen::Index> right(items.begin() + static_cast<std::ptrdiff_t>(half), items.end());
    const double vl = cluster_var(left), vr = cluster_var(right);
    const double alpha = 1.0 - vl / (vl + vr);
    bisect_oracle(s, left, scale * alpha, w);
    bisect_oracle(s, right, scale * (1.0 - alpha), w);
}

qf::ReturnsMatrix two_block_returns(std::uint64_t seed) {
    // block (c, d) is block (a, b) reversed in time: identical covariance, near-zero cross correlation
    const Eigen::Index t = 400;
    const qf::Matrix z = gaussian_matrix(t, 3, seed);
    qf::Matrix x(t, 4);
    x.col(0) = 0.01 * (z.col(0) + 0.3 * z.col(2));
    x.col(1) = 0.02 * (z.col(1) + 0.3 * z.col(2)) + qf::Vector::Constant(t, 0.0004);
    x.col(2) = x.col(0).reverse();
    x.col(3) = x.col(1).reverse();
    return qf::make_returns(x, {"a", "b", "c", "d"});
}

std::shared_ptr<qf::MeanRiskAllocator> min_variance_allocator() {
    return std::make_shared<qf::MeanRiskAllocator>(qf::ProblemSpec{}, qf::PriorSettings{});
}

}  // namespace

TEST(CorrDistance, Formula) {
    qf::Matrix s(3, 3);
    s << 1, 1, -1, 1, 1, 0, -1, 0, 1;
    // not PSD but the formula is element-wise; only correlations matter
    const auto d = qf::corr_distance(s);
    EXPECT_EQ(d(0, 0), 0.0);
    EXPECT_NEAR(d(0, 1), 0.0, 1e-15);
    EXPECT_NEAR(d(0, 2), 1.0, 1e-15);
    EXPECT_NEAR(d(1, 2), std::sqrt(0.5), 1e-15);
    EXPECT_EQ(d, d.transpose());
    qf::Matrix s2(2, 2);
    s2 << 1, 0.5, 0.5, 1;
    EXPECT_NEAR(qf::corr_distance(s2)(0, 1), 0.5, 1e-15);
}

TEST(Linkage, TwoLeaves) {
    qf::Matrix d(2, 2);
    d << 0, 0.3, 0.3, 0;
    const auto tree = qf::linkage_cluster(d);
    ASSERT_EQ(tree.merges.size(), 1u);
    EXPECT_EQ(tree.merges[0].left, 0);
    EXPECT_EQ(tree.merges[0].right, 1);
    EXPECT_DOUBLE_EQ(tree.merges[0].height, 0.3);
}

TEST(Linkage, EquidistantTieBreak) {
    const qf::Matrix d = qf::Matrix::Constant(3, 3, 0.5) - 0.5 * qf::Matrix::Identity(3, 3);
    for (auto method : {qf::Linkage::Single, qf::Linkage::Average}) {
        const auto tree = qf::linkage_cluster(d, method);
        ASSERT_EQ(tree.merges.size(), 2u);
        EXPECT_EQ(tree.merges[0].left, 0);
        EXPECT_EQ(tree.merges[0].right, 1);
        EXPECT_EQ(tree.merges[1].left, 2);
        EXPECT_EQ(tree.merges[1].right, 3);
        EXPECT_DOUBLE_EQ(tree.merges[0].height, tree.merges[1].height);
    }
}

TEST(Linkage, BlocksMergeFirst) {
    const auto d = qf::corr_distance(four_asset_sigma());
    for (auto method : {qf::Linkage::Single, qf::Linkage::Average, qf::Linkage::Ward}) {
        const auto tree = qf::linkage_cluster(d, method);
        ASSERT_EQ(tree.merges.size(), 3u);
        EXPECT_EQ(tree.merges[0].left, 0);
        EXPECT_EQ(tree.merges[0].right, 1);
        EXPECT_EQ(tree.merges[1].left, 2);
        EXPECT_EQ(tree.merges[1].right, 3);
        EXPECT_EQ(tree.merges[2].size, 4);
        EXPECT_EQ(tree.leaf_order(), (std::vector<Eigen::Index>{0, 1, 2, 3}));
        EXPECT_EQ(tree.cut(2), (std::vector<int>{0, 0, 1, 1}));
        EXPECT_EQ(tree.cut(1), (std::vector<int>{0, 0, 0, 0}));
        EXPECT_EQ(tree.cut(4), (std::vector<int>{0, 1, 2, 3}));
    }
}

TEST(Linkage, SingleLinkageMatchesMinimumSpanningTree) {
    // single-linkage merge heights are the sorted edge weights of a minimum spanning tree
    const auto d = qf::corr_distance(qf::testing::random_spd(9, 5));
    const auto tree = qf::linkage_cluster(d, qf::Linkage::Single);
    const Eigen::Index n = d.rows();
    std::vector<bool> in(static_cast<std::size_t>(n), false);
    std::vector<double> best(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
    std::vector<double> edges;
    best[0] = 0.0;
    for (Eigen::Index step = 0; step < n; ++step) {
        Eigen::Index u = -1;
        for (Eigen::Index i = 0; i < n; ++i)
            if (!in[static_cast<std::size_t>(i)] && (u < 0 || best[static_cast<std::size_t>(i)] < best[static_cast<std::size_t>(u)])) u = i;
        in[static_cast<std::size_t>(u)] = true;
        if (step > 0) edges.push_back(best[static_cast<std::size_t>(u)]);
        for (Eigen::Index i = 0; i < n; ++i) best[static_cast<std::size_t>(i)] = std::min(best[static_cast<std::size_t>(i)], d(u, i));
    }
    std::sort(edges.begin(), edges.end());
    ASSERT_EQ(tree.merges.size(), edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) EXPECT_NEAR(tree.merges[i].height, edges[i], 1e-15);
}

TEST(Silhouette, SeparatedClustersScoreHigh) {
    const auto d = qf::corr_distance(four_asset_sigma());
    EXPECT_GT(qf::silhouette_score(d, {0, 0, 1, 1}), qf::silhouette_score(d, {0, 1, 0, 1}));
    // hand computation for {0,0,1,1}: s_i = (b - a) / max(a, b)
    double total = 0.0;
    const int label[] = {0, 0, 1, 1};
    for (int i = 0; i < 4; ++i) {
        double a = 0.0, b = 0.0;
        for (int j = 0; j < 4; ++j) {
            if (j == i) continue;
            (label[j] == label[i] ? a : b) += d(i, j);
        }
        b /= 2.0;
        total += (b - a) / std::max(a, b);
    }
    EXPECT_NEAR(qf::silhouette_score(d, {0, 0, 1, 1}), total / 4.0, 1e-14);
}

TEST(Hrp, SingleAsset) {
    const auto w = qf::hrp(sigma_prior(qf::Matrix::Constant(1, 1, 0.04)));
    EXPECT_EQ(w.values[0], 1.0);
}

TEST(Hrp, TwoAssetsInverseVariance) {
    qf::Matrix s = qf::Matrix::Zero(2, 2);
    s(0, 0) = 1.0;
    s(1, 1) = 3.0;
    const auto w = qf::hrp(sigma_prior(s));
    EXPECT_EQ(w.values[0], 0.75);
    EXPECT_EQ(w.values[1], 0.25);
}

TEST(Hrp, IdenticalAssetsEqualWeight) {
    // uncorrelated identical assets: cluster variance is v / n, so every split is proportional
    const auto w = qf::hrp(sigma_prior(0.02 * qf::Matrix::Identity(5, 5)));
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(w.values[i], 0.2, 1e-15);
    // correlated identical assets split evenly when every bisection halves the group exactly
    const qf::Matrix s = 0.02 * qf::Matrix::Identity(4, 4) + 0.01 * qf::Matrix::Ones(4, 4);
    const auto c = qf::hrp(sigma_prior(s));
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(c.values[i], 0.25, 1e-15);
}

TEST(Hrp, FourAssetHandFixture) {
    const auto s = four_asset_sigma();
    const auto w = qf::hrp(sigma_prior(s, {"A", "B", "C", "D"}));
    // hand-evaluated bisection: [A, B] vs [C, D], then each pair by inverse variance
    const double expected[] = {0.13877153513222362, 0.06167623783654384, 0.7525197430882188, 0.04703248394301369};
    qf::Vector oracle(4);
    bisect_oracle(s, {0, 1, 2, 3}, 1.0, oracle);
    for (Eigen::Index i = 0; i < 4; ++i) {
        EXPECT_NEAR(w.values[i], expected[i], 1e-12);
        EXPECT_NEAR(w.values[i], oracle[i], 1e-12);
    }
}

TEST(Hrp, RandomCovarianceMatchesOracleOnLeafOrder) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const qf::Matrix s = qf::testing::random_spd(7, 60 + seed);
        std::vector<std::string> names;
        for (int i = 0; i < 7; ++i) names.push_back(std::string(1, static_cast<char>('a' + i)));
        const auto w = qf::hrp(sigma_prior(s, names));
        const auto order = qf::linkage_cluster(qf::corr_distance(s)).leaf_order();
        qf::Vector oracle(7);
        bisect_oracle(s, order, 1.0, oracle);
        EXPECT_LT((w.values - oracle).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Hrp, PermutationInvariance) {
    const qf::Matrix s = qf::testing::random_spd(6, 71);
    const std::vector<std::string> names = {"u", "v", "w", "x", "y", "z"};
    const auto base = qf::hrp(sigma_prior(s, names));
    std::vector<Eigen::Index> perm = {3, 5, 0, 2, 4, 1};
    qf::Matrix ps(6, 6);
    std::vector<std::string> pnames;
    for (Eigen::Index i = 0; i < 6; ++i) {
        pnames.push_back(names[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
        for (Eigen::Index j = 0; j < 6; ++j) ps(i, j) = s(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    const auto permuted = qf::hrp(sigma_prior(ps, pnames));
    for (Eigen::Index i = 0; i < 6; ++i) {
        EXPECT_EQ(permuted.values[i], base.values[perm[static_cast<std::size_t>(i)]]);
    }
}

TEST(Hrp, ScenarioMeasuresStayLongOnly) {
    const auto r = qf::testing::synthetic_returns(300, 6, 3);
    const auto prior = qf::empirical_prior(r);
    for (const auto& m : {qf::RiskMeasure::cvar(), qf::RiskMeasure::cdar(), qf::RiskMeasure::mad(),
                          qf::RiskMeasure::standard_deviation(), qf::RiskMeasure::worst_realization()}) {
        const auto w = qf::hrp(prior, m);
        EXPECT_NEAR(w.sum(), 1.0, 1e-12) << m.name();
        EXPECT_GE(w.values.minCoeff(), 0.0) << m.name();
    }
}

TEST(Baselines, EqualWeighted) {
    const auto w = qf::equal_weighted({"a", "b", "c", "d"});
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(w.values[i], 0.25);
}

TEST(Baselines, InverseVolatility) {
    qf::Matrix s = qf::Matrix::Zero(2, 2);
    s(0, 0) = 1.0;
    s(1, 1) = 9.0;
    const auto w = qf::inverse_volatility(sigma_prior(s));
    EXPECT_NEAR(w.values[0], 0.75, 1e-15);
    EXPECT_NEAR(w.values[1], 0.25, 1e-15);
    const auto same = qf::inverse_volatility(sigma_prior(0.3 * qf::Matrix::Identity(3, 3)));
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(same.values[i], 1.0 / 3, 1e-15);
}

TEST(Nco, SingleClusterIsInnerOptimizer) {
    const auto r = qf::testing::synthetic_returns(200, 5, 7);
    const auto inner = min_variance_allocator();
    const qf::NcoAllocator nco(inner, std::make_shared<qf::EqualWeightedAllocator>(), 1);
    EXPECT_EQ(nco.fit(r, {}).values, inner->fit(r, {}).values);
}

TEST(Nco, SingletonClustersAreOuterOptimizer) {
    const auto r = qf::testing::synthetic_returns(200, 5, 8);
    const auto outer = min_variance_allocator();
    const qf::NcoAllocator nco(std::make_shared<qf::EqualWeightedAllocator>(), outer, 5);
    EXPECT_LT((nco.fit(r, {}).values - outer->fit(r, {}).values).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Nco, SymmetricBlocksSplitEvenly) {
    const auto r = two_block_returns(9);
    const qf::NcoAllocator nco(min_variance_allocator(), min_variance_allocator(), 2);
    EXPECT_EQ(nco.clusters(qf::sample_moments(r).sigma), (std::vector<int>{0, 0, 1, 1}));
    const auto w = nco.fit(r, {});
    EXPECT_NEAR(w.values[0] + w.values[1], 0.5, 1e-6);
    EXPECT_NEAR(w.values[2] + w.values[3], 0.5, 1e-6);
    EXPECT_NEAR(w.values[0], w.values[2], 1e-6);
}

TEST(Nco, AutomaticClusterCountFindsBlocks) {
    const auto r = two_block_returns(10);
    const qf::NcoAllocator nco(min_variance_allocator(), min_variance_allocator());
    EXPECT_EQ(nco.clusters(qf::sample_moments(r).sigma), (std::vector<int>{0, 0, 1, 1}));
}

TEST(Stacking, EqualWeightFinalWithOneBase) {
    const auto r = qf::testing::synthetic_returns(300, 4, 11);
    const auto base = std::make_shared<qf::HrpAllocator>();
    const qf::StackingAllocator stack({base}, std::make_shared<qf::EqualWeightedAllocator>());
    EXPECT_LT((stack.fit(r, {}).values - base->fit(r, {}).values).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Stacking, IdenticalBasesCollapse) {
    const auto r = qf::testing::synthetic_returns(300, 4, 12);
    const auto base = std::make_shared<qf::InverseVolatilityAllocator>();
    const qf::StackingAllocator stack({base, base}, min_variance_allocator());
    EXPECT_LT((stack.fit(r, {}).values - base->fit(r, {}).values).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Stacking, LongOnlyCombination) {
    const auto r = qf::testing::synthetic_returns(400, 5, 13);
    qf::ProblemSpec cvar_spec;
    cvar_spec.risk_measure = qf::RiskMeasure::cvar();
    qf::ProblemSpec final_spec = cvar_spec;
    const qf::StackingAllocator stack(
        {std::make_shared<qf::InverseVolatilityAllocator>(), std::make_shared<qf::MeanRiskAllocator>(cvar_spec, qf::PriorSettings{}),
         std::make_shared<qf::HrpAllocator>()},
        std::make_shared<qf::MeanRiskAllocator>(final_spec, qf::PriorSettings{}));
    const auto w = stack.fit(r, {});
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.values.minCoeff(), -1e-12);
}

TEST(Stacking, WalkForwardCvNeedsEnoughRows) {
    const auto r = qf::testing::synthetic_returns(100, 3, 14);
    qf::StackingCv cv;
    cv.kind = qf::StackingCv::Kind::WalkForward;
    const qf::StackingAllocator stack({std::make_shared<qf::HrpAllocator>()}, std::make_shared<qf::EqualWeightedAllocator>(), cv);
    try {
        stack.fit(r, {});
        FAIL();
    } catch (const qf::Error& e) {
        EXPECT_EQ(e.code(), qf::ErrorCode::EmptyCv);
    }
}

TEST(Linkage, NamesRoundTrip) {
    for (auto l : {qf::Linkage::Single, qf::Linkage::Average, qf::Linkage::Ward}) {
        EXPECT_EQ(qf::parse_linkage(qf::to_string(l)), l);
    }
    EXPECT_THROW(qf::parse_linkage("complete"), qf::Error);
}
