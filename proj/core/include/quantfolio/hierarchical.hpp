/**
 * @file hierarchical.hpp
 * @brief Clustering-based allocators (HRP, NCO), stacking ensembles and the
 * equal-weight / inverse-volatility baselines.
 *
 * None of these invert a covariance matrix except through the optimizers
 * they wrap. All emit long-only weights summing to one.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quantfolio/allocator.hpp"
#include "quantfolio/model_selection.hpp"

namespace quantfolio {

/// d_ij = sqrt((1 - rho_ij) / 2) with an exact zero diagonal.
Matrix corr_distance(const Matrix& sigma);

enum class Linkage { Single, Average, Ward };

std::string to_string(Linkage linkage);
Linkage parse_linkage(const std::string& text);

/**
 * Agglomerative merge tree. Leaves are 0..N-1; the cluster formed by merge m
 * has id N + m. Each merge lists its children with the smaller id first.
 */
struct Dendrogram {
    struct Merge {
        Eigen::Index left = 0;
        Eigen::Index right = 0;
        double height = 0.0;
        Eigen::Index size = 0;
    };

    Eigen::Index leaves = 0;
    std::vector<Merge> merges;

    /// Leaf order of a left-to-right traversal of the tree (quasi-diagonalization).
    std::vector<Eigen::Index> leaf_order() const;
    /// Flat clustering into `k` groups by undoing the last k - 1 merges; each
    /// entry is a cluster id in 0..k-1, numbered by smallest member.
    std::vector<int> cut(int k) const;
};

/// Lance-Williams agglomeration; ties go to the lowest (i, j) pair of cluster ids.
Dendrogram linkage_cluster(const Matrix& distance, Linkage method = Linkage::Single);

/// Mean silhouette width of a flat clustering under a precomputed distance matrix.
double silhouette_score(const Matrix& distance, const std::vector<int>& labels);

/**
 * Hierarchical risk parity. Assets are processed in lexicographic name order
 * so the result is exactly invariant to the input column order.
 */
Weights hrp(const Prior& prior, const RiskMeasure& measure = RiskMeasure::variance(),
            Linkage linkage = Linkage::Single);

Weights equal_weighted(const std::vector<std::string>& assets);
Weights inverse_volatility(const Prior& prior);

class EqualWeightedAllocator final : public Allocator {
public:
    std::string name() const override { return "equal_weighted"; }
    Weights fit(const ReturnsMatrix& returns, const FitContext& context) const override;
};

class InverseVolatilityAllocator final : public Allocator {
public:
    explicit InverseVolatilityAllocator(PriorSettings prior = {}) : prior_(std::move(prior)) {}
    std::string name() const override { return "inverse_volatility"; }
    Weights fit(const ReturnsMatrix& returns, const FitContext& context) const override;

private:
    PriorSettings prior_;
};

class HrpAllocator final : public Allocator {
public:
    HrpAllocator(RiskMeasure measure = RiskMeasure::variance(), Linkage linkage = Linkage::Single,
                 PriorSettings prior = {});
    std::string name() const override { return "hrp"; }
    Weights fit(const ReturnsMatrix& returns, const FitContext& context) const override;

private:
    RiskMeasure measure_;
    Linkage linkage_;
    PriorSettings prior_;
};

/**
 * Nested clustering optimization: `inner` runs inside every cluster, `outer`
 * on the cluster return series. With no cluster count, k in 2..min(10, N-1)
 * maximizing the silhouette score is used.
 */
class NcoAllocator final : public Allocator {
public:
    NcoAllocator(AllocatorPtr inner, AllocatorPtr outer, std::optional<int> clusters = std::nullopt,
                 Linkage linkage = Linkage::Single);
    std::string name() const override { return "nco"; }
    Weights fit(const ReturnsMatrix& returns, const FitContext& context) const override;

    /// Cluster labels the fit would use on this covariance.
    std::vector<int> clusters(const Matrix& sigma) const;

private:
    AllocatorPtr inner_;
    AllocatorPtr outer_;
    std::optional<int> clusters_;
    Linkage linkage_;
};

/// Source of the inner cross-validation splits of a stacking ensemble.
struct StackingCv {
    enum class Kind { KFold, WalkForward } kind = Kind::KFold;
    int folds = 5;  ///< KFold: contiguous folds, each tested once
    Eigen::Index purge = kDefaultPurge;
    double embargo = kDefaultEmbargo;
    Eigen::Index train_size = 252;  ///< WalkForward
    Eigen::Index test_size = 60;

    SplitPlan plan(Eigen::Index samples) const;
};

/**
 * Stacking: every base estimator's out-of-sample returns (from `cv`) become
 * one column of a synthetic returns matrix on which `final` is fitted; the
 * result is the combination of the bases' full-sample weights.
 */
class StackingAllocator final : public Allocator {
public:
    /// Diagonal jitter added to the final stage's covariance so identical bases stay solvable.
    static constexpr double kFinalJitter = 1e-12;

    StackingAllocator(std::vector<AllocatorPtr> bases, AllocatorPtr final_estimator, StackingCv cv = {});
    std::string name() const override { return "stacking"; }
    Weights fit(const ReturnsMatrix& returns, const FitContext& context) const override;

private:
    std::vector<AllocatorPtr> bases_;
    AllocatorPtr final_;
    StackingCv cv_;
};

}  // namespace quantfolio
