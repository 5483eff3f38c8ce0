#include "quantfolio/hierarchical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "quantfolio/error.hpp"
#include "quantfolio/moments.hpp"
#include "quantfolio/parallel.hpp"

namespace quantfolio {

namespace {

void require_positive_variance(const Matrix& sigma, const std::vector<std::string>& labels) {
    for (Eigen::Index i = 0; i < sigma.rows(); ++i) {
        if (!(sigma(i, i) > 0.0)) {
            const std::string who = static_cast<std::size_t>(i) < labels.size() ? labels[static_cast<std::size_t>(i)]
                                                                                  : "#" + std::to_string(i);
            throw Error(ErrorCode::ZeroVarianceAsset, "asset " + who + " has zero variance");
        }
    }
}

std::vector<std::string> names_or_default(const std::vector<std::string>& names, Eigen::Index n) {
    if (static_cast<Eigen::Index>(names.size()) == n) return names;
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < n; ++i) out.push_back("A" + std::to_string(i));
    return out;
}

}  // namespace

Matrix corr_distance(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw Error(ErrorCode::DimensionMismatch, "covariance must be square");
    require_positive_variance(sigma, {});
    const auto n = sigma.rows();
    const Vector sd = sigma.diagonal().cwiseSqrt();
    Matrix d = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double rho = std::clamp(sigma(i, j) / (sd[i] * sd[j]), -1.0, 1.0);
            d(i, j) = d(j, i) = std::sqrt(0.5 * (1.0 - rho));
        }
    }
    return d;
}

std::string to_string(Linkage linkage) {
    switch (linkage) {
        case Linkage::Single: return "single";
        case Linkage::Average: return "average";
        case Linkage::Ward: return "ward";
    }
    return "unknown";
}

Linkage parse_linkage(const std::string& text) {
    for (auto l : {Linkage::Single, Linkage::Average, Linkage::Ward}) {
        if (to_string(l) == text) return l;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown linkage '" + text + "'");
}

std::vector<Eigen::Index> Dendrogram::leaf_order() const {
    if (merges.empty()) {
        std::vector<Eigen::Index> out(static_cast<std::size_t>(leaves));
        std::iota(out.begin(), out.end(), Eigen::Index{0});
        return out;
    }
    std::vector<Eigen::Index> out;
    std::vector<Eigen::Index> stack{leaves + static_cast<Eigen::Index>(merges.size()) - 1};
    while (!stack.empty()) {
        const auto node = stack.back();
        stack.pop_back();
        if (node < leaves) {
            out.push_back(node);
        } else {
            const auto& m = merges[static_cast<std::size_t>(node - leaves)];
            stack.push_back(m.right);  // left is visited first
            stack.push_back(m.left);
        }
    }
    return out;
}

std::vector<int> Dendrogram::cut(int k) const {
    if (k < 1 || k > leaves) throw Error(ErrorCode::InvalidArgument, "cluster count must lie in [1, N]");
    const auto total = static_cast<std::size_t>(leaves) + merges.size();
    std::vector<Eigen::Index> parent(total);
    std::iota(parent.begin(), parent.end(), Eigen::Index{0});
    const auto applied = static_cast<std::size_t>(leaves - k);
    for (std::size_t m = 0; m < applied; ++m) {
        const auto id = leaves + static_cast<Eigen::Index>(m);
        parent[static_cast<std::size_t>(merges[m].left)] = id;
        parent[static_cast<std::size_t>(merges[m].right)] = id;
    }
    auto root = [&](Eigen::Index i) {
        while (parent[static_cast<std::size_t>(i)] != i) i = parent[static_cast<std::size_t>(i)];
        return i;
    };
    std::vector<int> labels(static_cast<std::size_t>(leaves), -1);
    std::vector<std::pair<Eigen::Index, int>> seen;  // root -> label, in order of smallest member
    for (Eigen::Index i = 0; i < leaves; ++i) {
        const auto r = root(i);
        auto it = std::find_if(seen.begin(), seen.end(), [&](const auto& p) { return p.first == r; });
        if (it == seen.end()) {
            seen.emplace_back(r, static_cast<int>(seen.size()));
            labels[static_cast<std::size_t>(i)] = seen.back().second;
        } else {
            labels[static_cast<std::size_t>(i)] = it->second;
        }
    }
    return labels;
}

Dendrogram linkage_cluster(const Matrix& distance, Linkage method) {
    const auto n = distance.rows();
    if (n != distance.cols()) throw Error(ErrorCode::DimensionMismatch, "distance matrix must be square");
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "nothing to cluster");
    if (!distance.allFinite() || (distance.array() < 0.0).any()) {
        throw Error(ErrorCode::InvalidArgument, "distances must be finite and non-negative");
    }
    if ((distance - distance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
        throw Error(ErrorCode::InvalidArgument, "distance matrix must be symmetric");
    }

    const auto total = 2 * n - 1;
    Matrix d = Matrix::Zero(total, total);
    d.topLeftCorner(n, n) = distance;
    std::vector<Eigen::Index> size(static_cast<std::size_t>(total), 1);
    std::vector<Eigen::Index> active(static_cast<std::size_t>(n));
    std::iota(active.begin(), active.end(), Eigen::Index{0});

    Dendrogram tree;
    tree.leaves = n;
    for (Eigen::Index step = 0; step + 1 < n; ++step) {
        // active ids stay sorted, so the scan order is the (i, j) tie-break order
        double best = std::numeric_limits<double>::infinity();
        std::size_t bi = 0, bj = 1;
        for (std::size_t i = 0; i < active.size(); ++i) {
            for (std::size_t j = i + 1; j < active.size(); ++j) {
                const double v = d(active[i], active[j]);
                if (v < best) {
                    best = v;
                    bi = i;
                    bj = j;
                }
            }
        }
        const auto a = active[bi];
        const auto b = active[bj];
        const auto id = n + step;
        const auto na = static_cast<double>(size[static_cast<std::size_t>(a)]);
        const auto nb = static_cast<double>(size[static_cast<std::size_t>(b)]);
        size[static_cast<std::size_t>(id)] = size[static_cast<std::size_t>(a)] + size[static_cast<std::size_t>(b)];
        tree.merges.push_back({a, b, best, size[static_cast<std::size_t>(id)]});

        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
        active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
        for (const auto k : active) {
            const double dak = d(a, k);
            const double dbk = d(b, k);
            double v = 0.0;
            switch (method) {
                case Linkage::Single: v = std::min(dak, dbk); break;
                case Linkage::Average: v = (na * dak + nb * dbk) / (na + nb); break;
                case Linkage::Ward: {
                    const auto nk = static_cast<double>(size[static_cast<std::size_t>(k)]);
                    v = std::sqrt(std::max(
                        0.0, ((na + nk) * dak * dak + (nb + nk) * dbk * dbk - nk * best * best) / (na + nb + nk)));
                    break;
                }
            }
            d(id, k) = d(k, id) = v;
        }
        active.push_back(id);
    }
    return tree;
}

double silhouette_score(const Matrix& distance, const std::vector<int>& labels) {
    const auto n = distance.rows();
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw Error(ErrorCode::DimensionMismatch, "one label per point is required");
    }
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];

    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int own = labels[static_cast<std::size_t>(i)];
        if (counts[static_cast<std::size_t>(own)] <= 1) continue;  // singletons score 0
        std::vector<double> sums(static_cast<std::size_t>(k), 0.0);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j != i) sums[static_cast<std::size_t>(labels[static_cast<std::size_t>(j)])] += distance(i, j);
        }
        const double a = sums[static_cast<std::size_t>(own)] / (counts[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c != own && counts[static_cast<std::size_t>(c)] > 0) {
                b = std::min(b, sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)]);
            }
        }
        const double denom = std::max(a, b);
        if (std::isfinite(b) && denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

namespace {

/// Risk of the inverse-variance portfolio over `members`.
double side_risk(const Matrix& sigma, const Matrix& scenarios, const RiskMeasure& measure,
                 const std::vector<Eigen::Index>& members) {
    Vector w(static_cast<Eigen::Index>(members.size()));
    for (std::size_t i = 0; i < members.size(); ++i) w[static_cast<Eigen::Index>(i)] = 1.0 / sigma(members[i], members[i]);
    w /= w.sum();
    switch (measure.kind) {
        case MeasureKind::Variance:
        case MeasureKind::StandardDeviation: {
            double v = 0.0;
            for (std::size_t i = 0; i < members.size(); ++i) {
                for (std::size_t j = 0; j < members.size(); ++j) {
                    v += w[static_cast<Eigen::Index>(i)] * sigma(members[i], members[j]) * w[static_cast<Eigen::Index>(j)];
                }
            }
            return measure.kind == MeasureKind::Variance ? v : std::sqrt(std::max(0.0, v));
        }
        default: {
            Vector series = Vector::Zero(scenarios.rows());
            for (std::size_t i = 0; i < members.size(); ++i) {
                series += w[static_cast<Eigen::Index>(i)] * scenarios.col(members[i]);
            }
            return evaluate(measure, as_series(std::move(series)));
        }
    }
}

}  // namespace

Weights hrp(const Prior& prior, const RiskMeasure& measure, Linkage linkage) {
    prior.validate();
    const auto n = prior.assets();
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "HRP needs at least one asset");
    const auto labels = prior.labels();
    require_positive_variance(prior.sigma, labels);
    if (measure.scenario_based() && prior.scenarios.rows() == 0) {
        throw Error(ErrorCode::EmptySeries, "HRP with " + measure.name() + " needs scenario returns");
    }

    // canonical (name-sorted) order makes the result independent of the column order
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
        return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)];
    });
    Matrix sigma(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) sigma(i, j) = prior.sigma(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    Matrix scenarios;
    if (measure.scenario_based()) {
        scenarios.resize(prior.scenarios.rows(), n);
        for (Eigen::Index j = 0; j < n; ++j) scenarios.col(j) = prior.scenarios.values.col(perm[static_cast<std::size_t>(j)]);
    }

    Vector w = Vector::Ones(n);
    const auto order = linkage_cluster(corr_distance(sigma), linkage).leaf_order();
    std::vector<std::vector<Eigen::Index>> pending{order};
    while (!pending.empty()) {
        auto items = std::move(pending.back());
        pending.pop_back();
        if (items.size() < 2) continue;
        const auto half = static_cast<std::ptrdiff_t>(items.size() / 2);
        std::vector<Eigen::Index> left(items.begin(), items.begin() + half);
        std::vector<Eigen::Index> right(items.begin() + half, items.end());
        const double rl = side_risk(sigma, scenarios, measure, left);
        const double rr = side_risk(sigma, scenarios, measure, right);
        // measures that can go negative (gains) are kept inside [0, 1] to stay long-only
        const double alpha = rl + rr > 0.0 ? std::clamp(1.0 - rl / (rl + rr), 0.0, 1.0) : 0.5;
        for (auto i : left) w[i] *= alpha;
        for (auto i : right) w[i] *= 1.0 - alpha;
        pending.push_back(std::move(right));
        pending.push_back(std::move(left));
    }

    Weights out;
    out.assets = labels;
    out.values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) out.values[perm[static_cast<std::size_t>(i)]] = w[i];
    return out;
}

Weights equal_weighted(const std::vector<std::string>& assets) {
    if (assets.empty()) throw Error(ErrorCode::InvalidArgument, "equal weighting needs at least one asset");
    const auto n = static_cast<Eigen::Index>(assets.size());
    return Weights{assets, Vector::Constant(n, 1.0 / static_cast<double>(n)), {}};
}

Weights inverse_volatility(const Prior& prior) {
    const auto labels = prior.labels();
    if (prior.assets() < 1) throw Error(ErrorCode::InvalidArgument, "inverse volatility needs at least one asset");
    require_positive_variance(prior.sigma, labels);
    Vector w = prior.sigma.diagonal().cwiseSqrt().cwiseInverse();
    return Weights{labels, w / w.sum(), {}};
}

Weights EqualWeightedAllocator::fit(const ReturnsMatrix& returns, const FitContext&) const {
    return equal_weighted(names_or_default(returns.assets, returns.cols()));
}

Weights InverseVolatilityAllocator::fit(const ReturnsMatrix& returns, const FitContext& context) const {
    return inverse_volatility(estimate_prior(returns, prior_, context));
}

HrpAllocator::HrpAllocator(RiskMeasure measure, Linkage linkage, PriorSettings prior)
    : measure_(measure), linkage_(linkage), prior_(std::move(prior)) {}

Weights HrpAllocator::fit(const ReturnsMatrix& returns, const FitContext& context) const {
    return hrp(estimate_prior(returns, prior_, context), measure_, linkage_);
}

NcoAllocator::NcoAllocator(AllocatorPtr inner, AllocatorPtr outer, std::optional<int> clusters, Linkage linkage)
    : inner_(std::move(inner)), outer_(std::move(outer)), clusters_(clusters), linkage_(linkage) {
    if (!inner_ || !outer_) throw Error(ErrorCode::InvalidConfig, "NCO needs inner and outer estimators");
}

std::vector<int> NcoAllocator::clusters(const Matrix& sigma) const {
    const auto n = static_cast<int>(sigma.rows());
    const Matrix d = corr_distance(sigma);
    const Dendrogram tree = linkage_cluster(d, linkage_);
    if (clusters_) {
        if (*clusters_ < 1 || *clusters_ > n) {
            throw Error(ErrorCode::InvalidConfig, "NCO cluster count " + std::to_string(*clusters_) +
                                                      " must lie in [1, " + std::to_string(n) + "]");
        }
        return tree.cut(*clusters_);
    }
    int best_k = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= std::min(10, n - 1); ++k) {
        const double s = silhouette_score(d, tree.cut(k));
        if (s > best) {
            best = s;
            best_k = k;
        }
    }
    return tree.cut(best_k);
}

Weights NcoAllocator::fit(const ReturnsMatrix& returns, const FitContext& context) const {
    const auto n = returns.cols();
    if (n < 2) throw Error(ErrorCode::InvalidArgument, "NCO needs at least two assets");
    const auto names = names_or_default(returns.assets, n);
    const auto labels = clusters(sample_moments(returns).sigma);
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;

    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])].push_back(i);

    FitContext local = context;
    local.threads = 1;
    auto intra = parallel_map<Weights>(members.size(), context.threads, [&](std::size_t c) {
        if (members[c].size() == 1) return Weights{{names[static_cast<std::size_t>(members[c][0])]}, Vector::Ones(1), {}};
        return inner_->fit(returns.take_columns(members[c]), local);
    });

    Weights out;
    out.assets = names;
    out.values = Vector::Zero(n);
    for (const auto& w : intra) out.warnings.insert(out.warnings.end(), w.warnings.begin(), w.warnings.end());

    if (k == 1) {
        out.values = intra[0].values;
        return out;
    }
    ReturnsMatrix reduced;
    reduced.dates = returns.dates;
    reduced.kind = returns.kind;
    reduced.values.resize(returns.rows(), k);
    for (int c = 0; c < k; ++c) {
        const auto& m = members[static_cast<std::size_t>(c)];
        reduced.assets.push_back(m.size() == 1 ? names[static_cast<std::size_t>(m[0])] : "cluster" + std::to_string(c));
        reduced.values.col(c) = returns.take_columns(m).values * intra[static_cast<std::size_t>(c)].values;
    }
    const Weights inter = outer_->fit(reduced, context);
    out.warnings.insert(out.warnings.end(), inter.warnings.begin(), inter.warnings.end());
    for (int c = 0; c < k; ++c) {
        const auto& m = members[static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j < m.size(); ++j) {
            out.values[m[j]] = intra[static_cast<std::size_t>(c)].values[static_cast<Eigen::Index>(j)] * inter.values[c];
        }
    }
    return out;
}

SplitPlan StackingCv::plan(Eigen::Index samples) const {
    switch (kind) {
        case Kind::KFold: return cpcv(samples, CpcvConfig{folds, 1, purge, embargo});
        case Kind::WalkForward: return walk_forward(samples, train_size, test_size);
    }
    throw Error(ErrorCode::InvalidConfig, "unknown stacking cv");
}

StackingAllocator::StackingAllocator(std::vector<AllocatorPtr> bases, AllocatorPtr final_estimator, StackingCv cv)
    : bases_(std::move(bases)), final_(std::move(final_estimator)), cv_(cv) {
    if (bases_.empty()) throw Error(ErrorCode::InvalidConfig, "stacking needs at least one base estimator");
    if (!final_) throw Error(ErrorCode::InvalidConfig, "stacking needs a final estimator");
    for (const auto& b : bases_) {
        if (!b) throw Error(ErrorCode::InvalidConfig, "stacking base estimator is missing");
    }
}

Weights StackingAllocator::fit(const ReturnsMatrix& returns, const FitContext& context) const {
    const SplitPlan plan = cv_.plan(returns.rows());
    if (plan.empty()) {
        throw Error(ErrorCode::EmptyCv, "stacking cv yields no splits on " + std::to_string(returns.rows()) + " samples");
    }
    const auto k = static_cast<Eigen::Index>(bases_.size());

    ReturnsMatrix stacked;
    stacked.kind = returns.kind;
    std::vector<Weights> full;
    Weights out;
    for (Eigen::Index b = 0; b < k; ++b) {
        const auto& base = *bases_[static_cast<std::size_t>(b)];
        // every plan has at least one path covering its test rows; the first is used
        const auto oos = cross_val_predict(base, returns, plan, context).front();
        if (b == 0) {
            stacked.dates = oos.returns.dates;
            stacked.values.resize(oos.returns.size(), k);
        }
        stacked.values.col(b) = oos.returns.values;
        std::string label = base.name();
        if (std::find(stacked.assets.begin(), stacked.assets.end(), label) != stacked.assets.end()) {
            label += "_" + std::to_string(b);
        }
        stacked.assets.push_back(std::move(label));
        full.push_back(base.fit(returns, context));
        out.warnings.insert(out.warnings.end(), full.back().warnings.begin(), full.back().warnings.end());
    }

    FitContext final_context = context;
    final_context.factors = nullptr;
    final_context.covariance_jitter = context.covariance_jitter + kFinalJitter;
    const Weights combination = final_->fit(stacked, final_context);

    out.assets = names_or_default(returns.assets, returns.cols());
    out.values = Vector::Zero(returns.cols());
    for (Eigen::Index b = 0; b < k; ++b) out.values += combination.values[b] * full[static_cast<std::size_t>(b)].values;
    const double total = out.values.sum();
    if (!(std::abs(total) > 0.0)) throw Error(ErrorCode::SolverFailure, "stacking combination has zero total weight");
    out.values /= total;
    return out;
}

}  // namespace quantfolio
