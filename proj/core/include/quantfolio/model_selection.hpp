/**
 * @file model_selection.hpp
 * @brief Time-ordered split plans (walk-forward, combinatorial purged CV)
 * and out-of-sample portfolio assembly.
 *
 * Folds are always contiguous in time. Index sets are stored as sorted,
 * disjoint half-open ranges so plans serialize compactly and audits are
 * cheap.
 */
#pragma once

#include <string>
#include <vector>

#include "quantfolio/allocator.hpp"
#include "quantfolio/portfolio.hpp"

namespace quantfolio {

inline constexpr Eigen::Index kDefaultPurge = 1;
inline constexpr double kDefaultEmbargo = 0.01;

/// Half-open row range [begin, end).
struct IndexRange {
    Eigen::Index begin = 0;
    Eigen::Index end = 0;

    Eigen::Index size() const { return end - begin; }
    bool operator==(const IndexRange&) const = default;
};

using RangeSet = std::vector<IndexRange>;

/// Expands ranges into the individual indices they cover.
std::vector<Eigen::Index> expand(const RangeSet& ranges);

struct Split {
    RangeSet train;
    RangeSet test;             ///< one range per test fold, chronological
    std::vector<int> folds;    ///< fold id of each test range (CPCV)
    std::vector<int> paths;    ///< path id of each test range (CPCV)
};

struct SplitPlan {
    enum class Kind { WalkForward, Cpcv } kind = Kind::WalkForward;
    Eigen::Index samples = 0;
    std::vector<Split> splits;
    int path_count = 0;  ///< CPCV only
    std::vector<std::string> warnings;

    bool empty() const { return splits.empty(); }
};

/// Only complete test windows are emitted; a plan that fits none is empty and carries a warning.
SplitPlan walk_forward(Eigen::Index samples, Eigen::Index train_size, Eigen::Index test_size, bool expanding = false);

struct CpcvConfig {
    int folds = 10;        ///< k
    int test_folds = 2;    ///< p
    Eigen::Index purge = kDefaultPurge;
    double embargo = kDefaultEmbargo;  ///< fraction of the sample count

    void validate() const;
};

/// Contiguous fold boundaries: `folds` ranges, longer ones first, sizes differing by at most one.
RangeSet fold_ranges(Eigen::Index samples, int folds);

/**
 * One split per p-subset of folds in lexicographic order. Train rows within
 * `purge` samples of a test block (either side) or within ceil(embargo * T)
 * samples after it are removed. The j-th time a fold is tested it belongs to path j.
 */
SplitPlan cpcv(Eigen::Index samples, const CpcvConfig& config);

/// `{"splits":[{"train":[[b,e],...],"test":[[b,e],...]},...]}` with half-open ranges.
std::string plan_json(const SplitPlan& plan);

/**
 * Fits the allocator on every split's train rows and applies the weights to
 * its test rows. Walk-forward plans give one portfolio; CPCV plans give one
 * portfolio per path, each covering every sample once. Splits run on
 * context.threads workers; split i sees seed + i.
 */
std::vector<MultiPeriodPortfolio> cross_val_predict(const Allocator& allocator, const ReturnsMatrix& returns,
                                                    const SplitPlan& plan, const FitContext& context = {},
                                                    const std::string& name = {});

}  // namespace quantfolio
