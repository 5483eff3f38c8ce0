#include "quantfolio/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "quantfolio/error.hpp"
#include "quantfolio/parallel.hpp"

namespace quantfolio {

std::vector<Eigen::Index> expand(const RangeSet& ranges) {
    std::vector<Eigen::Index> out;
    for (const auto& r : ranges) {
        for (auto i = r.begin; i < r.end; ++i) out.push_back(i);
    }
    return out;
}

SplitPlan walk_forward(Eigen::Index samples, Eigen::Index train_size, Eigen::Index test_size, bool expanding) {
    if (train_size < 1 || test_size < 1) {
        throw Error(ErrorCode::InvalidConfig, "walk-forward train and test sizes must be at least 1");
    }
    if (samples < 0) throw Error(ErrorCode::InvalidArgument, "negative sample count");
    SplitPlan plan;
    plan.kind = SplitPlan::Kind::WalkForward;
    plan.samples = samples;
    for (Eigen::Index start = 0; start + train_size + test_size <= samples; start += test_size) {
        const Eigen::Index split = start + train_size;
        Split s;
        s.train.push_back({expanding ? 0 : start, split});
        s.test.push_back({split, split + test_size});
        plan.splits.push_back(std::move(s));
    }
    if (plan.empty()) {
        plan.warnings.push_back("walk-forward: " + std::to_string(samples) + " samples cannot hold one train window of " +
                                std::to_string(train_size) + " plus one test window of " + std::to_string(test_size));
    }
    return plan;
}

void CpcvConfig::validate() const {
    if (folds < 2) throw Error(ErrorCode::InvalidConfig, "cpcv needs at least 2 folds");
    if (test_folds < 1 || test_folds >= folds) {
        throw Error(ErrorCode::InvalidConfig, "cpcv test fold count must lie in [1, folds)");
    }
    if (purge < 0) throw Error(ErrorCode::InvalidConfig, "purge horizon must be non-negative");
    if (!(embargo >= 0.0) || !std::isfinite(embargo)) {
        throw Error(ErrorCode::InvalidConfig, "embargo fraction must be a non-negative number");
    }
}

RangeSet fold_ranges(Eigen::Index samples, int folds) {
    if (folds < 1 || samples < folds) {
        throw Error(ErrorCode::InvalidConfig, "cannot split " + std::to_string(samples) + " samples into " +
                                                  std::to_string(folds) + " non-empty folds");
    }
    RangeSet out;
    const Eigen::Index base = samples / folds;
    const Eigen::Index extra = samples % folds;
    Eigen::Index begin = 0;
    for (int f = 0; f < folds; ++f) {
        const Eigen::Index size = base + (f < extra ? 1 : 0);
        out.push_back({begin, begin + size});
        begin += size;
    }
    return out;
}

namespace {

/// Calls `visit` with every p-subset of 0..k-1 in lexicographic order.
template <typename Visit>
void combinations(int k, int p, Visit&& visit) {
    std::vector<int> pick(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) pick[static_cast<std::size_t>(i)] = i;
    while (true) {
        visit(pick);
        int i = p - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == k - p + i) --i;
        if (i < 0) return;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < p; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
}

}  // namespace

SplitPlan cpcv(Eigen::Index samples, const CpcvConfig& config) {
    config.validate();
    const RangeSet folds = fold_ranges(samples, config.folds);
    // guard against 0.02 * 500 = 10.000000000000002 style round-off
    const auto embargo = static_cast<Eigen::Index>(std::ceil(config.embargo * static_cast<double>(samples) - 1e-9));

    SplitPlan plan;
    plan.kind = SplitPlan::Kind::Cpcv;
    plan.samples = samples;
    std::vector<int> occurrences(folds.size(), 0);

    combinations(config.folds, config.test_folds, [&](const std::vector<int>& pick) {
        Split split;
        std::vector<char> excluded(static_cast<std::size_t>(samples), 0);
        for (const int f : pick) {
            const auto& r = folds[static_cast<std::size_t>(f)];
            split.test.push_back(r);
            split.folds.push_back(f);
            split.paths.push_back(occurrences[static_cast<std::size_t>(f)]++);
            for (auto i = r.begin; i < r.end; ++i) excluded[static_cast<std::size_t>(i)] = 1;
        }
        // merge adjacent test folds into blocks, then purge / embargo around each block
        RangeSet blocks;
        for (const auto& r : split.test) {
            if (!blocks.empty() && blocks.back().end == r.begin) {
                blocks.back().end = r.end;
            } else {
                blocks.push_back(r);
            }
        }
        for (const auto& b : blocks) {
            const auto lo = std::max<Eigen::Index>(0, b.begin - config.purge);
            const auto hi = std::min<Eigen::Index>(samples, b.end + config.purge + embargo);
            for (auto i = lo; i < hi; ++i) excluded[static_cast<std::size_t>(i)] = 1;
        }
        for (Eigen::Index i = 0; i < samples;) {
            if (excluded[static_cast<std::size_t>(i)]) {
                ++i;
                continue;
            }
            Eigen::Index j = i;
            while (j < samples && !excluded[static_cast<std::size_t>(j)]) ++j;
            split.train.push_back({i, j});
            i = j;
        }
        plan.splits.push_back(std::move(split));
    });
    plan.path_count = *std::max_element(occurrences.begin(), occurrences.end());
    return plan;
}

std::string plan_json(const SplitPlan& plan) {
    auto ranges = [](std::ostringstream& out, const RangeSet& set) {
        out << '[';
        for (std::size_t i = 0; i < set.size(); ++i) {
            if (i > 0) out << ',';
            out << '[' << set[i].begin << ',' << set[i].end << ']';
        }
        out << ']';
    };
    std::ostringstream out;
    out << "{\"splits\":[";
    for (std::size_t s = 0; s < plan.splits.size(); ++s) {
        if (s > 0) out << ',';
        out << "{\"train\":";
        ranges(out, plan.splits[s].train);
        out << ",\"test\":";
        ranges(out, plan.splits[s].test);
        out << '}';
    }
    out << "]}";
    return out.str();
}

namespace {

struct FittedSplit {
    Vector weights;
    std::vector<Vector> test_returns;  ///< one per test range
};

Segment make_segment(const ReturnsMatrix& returns, const IndexRange& range, const Vector& weights) {
    Segment s;
    s.weights = weights;
    s.begin = range.begin;
    s.end = range.end;
    if (!returns.dates.empty()) {
        s.first = returns.dates[static_cast<std::size_t>(range.begin)];
        s.last = returns.dates[static_cast<std::size_t>(range.end - 1)];
    }
    return s;
}

std::vector<Date> dates_of(const ReturnsMatrix& returns, const IndexRange& range) {
    if (returns.dates.empty()) return {};
    return {returns.dates.begin() + range.begin, returns.dates.begin() + range.end};
}

}  // namespace

std::vector<MultiPeriodPortfolio> cross_val_predict(const Allocator& allocator, const ReturnsMatrix& returns,
                                                    const SplitPlan& plan, const FitContext& context,
                                                    const std::string& name) {
    if (plan.empty()) throw Error(ErrorCode::EmptyCv, "the split plan has no splits");
    if (plan.samples != returns.rows()) {
        throw Error(ErrorCode::DimensionMismatch, "the split plan was built for " + std::to_string(plan.samples) +
                                                      " samples, the returns have " + std::to_string(returns.rows()));
    }
    const int threads = clamp_threads(context.threads);
    const bool parallel = threads > 1 && plan.splits.size() > 1;

    auto fitted = parallel_map<FittedSplit>(plan.splits.size(), threads, [&](std::size_t i) {
        const Split& split = plan.splits[i];
        FitContext local = context;
        local.seed = context.seed + i;
        if (parallel) local.threads = 1;  // parallelism is spent on the splits
        const auto rows = expand(split.train);
        const ReturnsMatrix train = returns.take_rows(rows);
        ReturnsMatrix factor_rows;
        if (context.factors != nullptr) {
            factor_rows = context.factors->take_rows(rows);
            local.factors = &factor_rows;
        }
        FittedSplit out;
        try {
            out.weights = allocator.fit(train, local).values;
        } catch (const Error& e) {
            throw Error(e.code(), "split " + std::to_string(i) + ": " + e.detail());
        }
        for (const auto& r : split.test) {
            out.test_returns.push_back(returns.values.middleRows(r.begin, r.size()) * out.weights);
        }
        return out;
    });

    auto blank = [&](std::string label) {
        MultiPeriodPortfolio p;
        p.name = std::move(label);
        p.assets = returns.assets;
        return p;
    };
    const std::string base = name.empty() ? allocator.name() : name;

    if (plan.kind == SplitPlan::Kind::WalkForward) {
        MultiPeriodPortfolio p = blank(base);
        for (std::size_t s = 0; s < plan.splits.size(); ++s) {
            const auto& split = plan.splits[s];
            for (std::size_t r = 0; r < split.test.size(); ++r) {
                p.append(make_segment(returns, split.test[r], fitted[s].weights), fitted[s].test_returns[r],
                         dates_of(returns, split.test[r]));
            }
        }
        return {std::move(p)};
    }

    struct Piece {
        IndexRange range;
        std::size_t split;
        std::size_t slot;
    };
    std::vector<std::vector<Piece>> paths(static_cast<std::size_t>(plan.path_count));
    for (std::size_t s = 0; s < plan.splits.size(); ++s) {
        const auto& split = plan.splits[s];
        for (std::size_t r = 0; r < split.test.size(); ++r) {
            paths[static_cast<std::size_t>(split.paths[r])].push_back({split.test[r], s, r});
        }
    }
    std::vector<MultiPeriodPortfolio> out;
    for (std::size_t j = 0; j < paths.size(); ++j) {
        auto& pieces = paths[j];
        std::sort(pieces.begin(), pieces.end(),
                  [](const Piece& a, const Piece& b) { return a.range.begin < b.range.begin; });
        MultiPeriodPortfolio p = blank(base + "_path" + std::to_string(j));
        for (const auto& piece : pieces) {
            p.append(make_segment(returns, piece.range, fitted[piece.split].weights),
                     fitted[piece.split].test_returns[piece.slot], dates_of(returns, piece.range));
        }
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace quantfolio
