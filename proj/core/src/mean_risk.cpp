#include "quantfolio/mean_risk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "quantfolio/error.hpp"
#include "quantfolio/parallel.hpp"

namespace quantfolio {

using conic::kInf;
using conic::QpBuilder;
using conic::SolveStatus;
using conic::Terms;

std::string to_string(Objective objective) {
    switch (objective) {
        case Objective::MinimizeRisk: return "minimize_risk";
        case Objective::MaximizeReturn: return "maximize_return";
        case Objective::MaximizeUtility: return "maximize_utility";
        case Objective::MaximizeRatio: return "maximize_ratio";
    }
    return "unknown";
}

Objective parse_objective(const std::string& text) {
    for (auto o : {Objective::MinimizeRisk, Objective::MaximizeReturn, Objective::MaximizeUtility,
                   Objective::MaximizeRatio}) {
        if (to_string(o) == text) return o;
    }
    throw Error(ErrorCode::InvalidConfig, "unknown objective '" + text + "'");
}

namespace {

bool is_quadratic(const RiskMeasure& m) {
    return m.kind == MeasureKind::Variance || m.kind == MeasureKind::StandardDeviation;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
}

}  // namespace

void ProblemSpec::validate() const {
    prior.validate();
    const auto n = prior.assets();
    require(n >= 1, "the prior has no assets");
    require(std::isfinite(risk_aversion) && risk_aversion >= 0.0, "risk aversion must be a non-negative number");
    require(std::isfinite(l1_coef) && l1_coef >= 0.0, "l1_coef must be non-negative");
    require(std::isfinite(l2_coef) && l2_coef >= 0.0, "l2_coef must be non-negative");
    require(!frontier_size || *frontier_size >= 1, "frontier_size must be at least 1");

    const auto& c = constraints;
    require(std::isfinite(c.budget), "budget must be finite");
    if (c.lower.size() != 0 && c.lower.size() != n) throw Error(ErrorCode::DimensionMismatch, "lower bound length");
    if (c.upper.size() != 0 && c.upper.size() != n) throw Error(ErrorCode::DimensionMismatch, "upper bound length");
    const auto labels = prior.labels();
    for (const auto& cap : c.asset_caps) {
        require(std::find(labels.begin(), labels.end(), cap.asset) != labels.end(),
                "asset cap refers to unknown asset '" + cap.asset + "'");
        require(!std::isnan(cap.upper), "asset cap must be a number");
    }
    for (const auto& row : c.linear) {
        if (row.coefficients.size() != n) {
            throw Error(ErrorCode::DimensionMismatch, "linear constraint '" + row.name + "' has the wrong length");
        }
        require(row.coefficients.allFinite() && std::isfinite(row.lower), "linear constraints must be finite");
    }
    require(!c.min_return || std::isfinite(*c.min_return), "min_return must be finite");

    auto check_measure = [&](const RiskMeasure& m) {
        if (m.kind == MeasureKind::CVaR || m.kind == MeasureKind::CDaR) {
            require(m.beta > 0.0 && m.beta < 1.0, "beta must lie in (0, 1)");
        }
        if (m.scenario_based() && prior.scenarios.rows() == 0) {
            throw Error(ErrorCode::EmptySeries, m.name() + " needs scenario returns in the prior");
        }
    };
    check_measure(risk_measure);
    for (const auto& cap : c.risk_caps) {
        check_measure(cap.measure);
        require(std::isfinite(cap.bound), "risk cap bound must be finite");
    }
}

double portfolio_risk(const RiskMeasure& measure, const Prior& prior, const Vector& weights) {
    switch (measure.kind) {
        case MeasureKind::Variance: return weights.dot(prior.sigma * weights);
        case MeasureKind::StandardDeviation: return std::sqrt(std::max(0.0, weights.dot(prior.sigma * weights)));
        default: return evaluate(measure, as_series(prior.scenarios.values * weights));
    }
}

namespace {

/// Numerical slack when testing caps and budgets against solver output.
constexpr double kCapSlack = 1e-9;
constexpr int kCapBisections = 200;
constexpr int kScaleSearchEvaluations = 200;

struct Context {
    explicit Context(const ProblemSpec& s) : spec(s) {}

    const ProblemSpec& spec;
    Eigen::Index n = 0;
    Vector lower;
    Vector upper;
    std::vector<std::pair<Eigen::Index, double>> caps;  // (asset, cap) rows, kept separate for diagnosis
    std::optional<double> variance_cap;                // tightest variance-equivalent cap
    bool ratio = false;
    bool stddev_objective = false;  // risk term is sqrt(w' Sigma w)
    bool needs_scale = false;       // the sqrt term cannot be replaced by its square
    bool l1_active = false;
    double kappa = 1.0;             // ratio normalization mu'y = kappa
    std::vector<std::string> labels;
    std::vector<std::string> warnings;
};

Context make_context(const ProblemSpec& spec) {
    Context ctx(spec);
    const auto& c = spec.constraints;
    ctx.n = spec.prior.assets();
    ctx.labels = spec.prior.labels();
    ctx.lower = c.lower.size() ? c.lower : Vector::Constant(ctx.n, c.default_lower);
    ctx.upper = c.upper.size() ? c.upper : Vector::Constant(ctx.n, c.default_upper);
    for (Eigen::Index i = 0; i < ctx.n; ++i) {
        if (!(ctx.lower[i] <= ctx.upper[i])) {
            throw Error(ErrorCode::InvalidArgument, "lower bound exceeds upper bound for " + ctx.labels[i]);
        }
    }
    for (const auto& cap : c.asset_caps) {
        const auto it = std::find(ctx.labels.begin(), ctx.labels.end(), cap.asset);
        ctx.caps.emplace_back(it - ctx.labels.begin(), cap.upper);
    }

    ctx.ratio = spec.objective == Objective::MaximizeRatio;
    for (const auto& cap : c.risk_caps) {
        if (!is_quadratic(cap.measure)) continue;
        if (ctx.ratio) {
            throw Error(ErrorCode::UnsupportedMeasure,
                        "variance / standard deviation caps cannot be combined with maximize_ratio");
        }
        if (cap.bound < 0.0) {
            throw Error(ErrorCode::InfeasibleProblem, "infeasible: risk cap on " + cap.measure.name() + " is negative");
        }
        const double v = cap.measure.kind == MeasureKind::StandardDeviation ? cap.bound * cap.bound : cap.bound;
        ctx.variance_cap = ctx.variance_cap ? std::min(*ctx.variance_cap, v) : v;
    }

    const bool risk_in_objective = spec.objective != Objective::MaximizeReturn;
    const bool regularized = spec.l1_coef > 0.0 || spec.l2_coef > 0.0;
    ctx.stddev_objective =
        risk_in_objective && (spec.risk_measure.kind == MeasureKind::StandardDeviation ||
                              (ctx.ratio && spec.risk_measure.kind == MeasureKind::Variance));
    // Without other terms, argmin sqrt(v) == argmin v; otherwise the square root must be kept.
    ctx.needs_scale = ctx.stddev_objective && (spec.objective == Objective::MaximizeUtility || regularized);

    if (spec.l1_coef > 0.0) {
        ctx.l1_active = (ctx.lower.array() < 0.0).any();
        if (!ctx.l1_active) {
            ctx.warnings.push_back(
                "l1 regularization is constant on a long-only set (equals l1_coef * budget); it has no effect");
        }
    }
    if (ctx.ratio) {
        if (!(c.budget > 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "maximize_ratio needs a positive budget");
        }
        const double m = spec.prior.mu.cwiseAbs().maxCoeff();
        ctx.kappa = m > 0.0 ? m : 1.0;
    }

    // Cheap feasibility screen: the budget must be reachable inside the box.
    Vector capped_upper = ctx.upper;
    for (const auto& [i, cap] : ctx.caps) capped_upper[i] = std::min(capped_upper[i], cap);
    const double lo = ctx.lower.sum();
    const double hi = capped_upper.sum();
    const double tol = kCapSlack * std::max(1.0, std::abs(c.budget));
    if (c.budget < lo - tol || c.budget > hi + tol) {
        throw Error(ErrorCode::InfeasibleProblem,
                    "infeasible: budget " + format_number(c.budget) + " lies outside the range [" + format_number(lo) +
                        ", " + format_number(hi) + "] allowed by the weight bounds and caps");
    }
    return ctx;
}

/// Per-solve tuning of the objective.
struct Knobs {
    double nu = 0.0;     ///< multiplier on w' Sigma w from a variance cap
    double scale = 0.0;  ///< s > 0: sqrt(v) is replaced by v / (2 s) + s / 2
};

struct Assembly {
    QpBuilder builder;
    Eigen::Index x0 = 0;  ///< first weight (or homogenized weight) column
    Eigen::Index t = -1;  ///< homogenizing variable (ratio mode)
};

Assembly assemble(const Context& ctx, const Knobs& knobs) {
    const auto& spec = ctx.spec;
    const auto& c = spec.constraints;
    const auto& prior = spec.prior;
    const auto n = ctx.n;
    Assembly a;
    QpBuilder& b = a.builder;

    if (ctx.ratio) {
        a.x0 = b.add_variables(n);
        a.t = b.add_variables(1, 0.0, kInf);
    } else {
        a.x0 = b.add_variables(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            b.set_bounds(a.x0 + i, std::isfinite(ctx.lower[i]) ? ctx.lower[i] : -kInf,
                         std::isfinite(ctx.upper[i]) ? ctx.upper[i] : kInf);
        }
    }
    std::vector<Eigen::Index> cols(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) cols[static_cast<std::size_t>(i)] = a.x0 + i;

    // terms <= rhs, where rhs scales with t in ratio mode
    auto less_equal = [&](Terms terms, double rhs, const std::string& tag) {
        if (ctx.ratio) {
            if (rhs != 0.0) terms.emplace_back(a.t, -rhs);
            b.add_less_equal(std::move(terms), 0.0, tag);
        } else {
            b.add_less_equal(std::move(terms), rhs, tag);
        }
    };
    auto equal = [&](Terms terms, double rhs, const std::string& tag) {
        if (ctx.ratio) {
            if (rhs != 0.0) terms.emplace_back(a.t, -rhs);
            b.add_equality(std::move(terms), 0.0, tag);
        } else {
            b.add_equality(std::move(terms), rhs, tag);
        }
    };
    auto weighted = [&](const Vector& coef, double sign) {
        Terms terms;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (coef[i] != 0.0) terms.emplace_back(a.x0 + i, sign * coef[i]);
        }
        return terms;
    };

    equal(weighted(Vector::Ones(n), 1.0), c.budget, "budget");
    if (ctx.ratio) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (std::isfinite(ctx.upper[i])) less_equal({{a.x0 + i, 1.0}}, ctx.upper[i], "bounds");
            if (std::isfinite(ctx.lower[i])) less_equal({{a.x0 + i, -1.0}}, -ctx.lower[i], "bounds");
        }
    }
    for (const auto& [i, cap] : ctx.caps) less_equal({{a.x0 + i, 1.0}}, cap, "cap:" + ctx.labels[static_cast<std::size_t>(i)]);
    for (const auto& row : c.linear) less_equal(weighted(row.coefficients, -1.0), -row.lower, "linear:" + row.name);
    if (c.min_return) less_equal(weighted(prior.mu, -1.0), -*c.min_return, "min_return");
    for (const auto& cap : c.risk_caps) {
        if (is_quadratic(cap.measure)) continue;
        const std::string tag = "risk_cap:" + cap.measure.name();
        const Terms expr = b.place(conic::reformulate_risk(cap.measure, prior.scenarios.values), cols, tag);
        less_equal(expr, cap.bound, tag);
    }
    if (ctx.ratio) b.add_equality(weighted(prior.mu, 1.0), ctx.kappa, "positive_expected_return");

    // objective
    auto add_risk = [&](double weight) {
        if (weight == 0.0) return;
        const auto& m = spec.risk_measure;
        if (ctx.stddev_objective || m.kind == MeasureKind::StandardDeviation) {
            const double factor = knobs.scale > 0.0 ? weight / (2.0 * knobs.scale) : weight;
            b.add_quadratic(a.x0, factor * prior.sigma);
        } else if (m.kind == MeasureKind::Variance) {
            b.add_quadratic(a.x0, weight * prior.sigma);
        } else {
            const Terms expr = b.place(conic::reformulate_risk(m, prior.scenarios.values), cols, "objective");
            for (const auto& [j, v] : expr) b.add_cost(j, weight * v);
        }
    };
    switch (spec.objective) {
        case Objective::MinimizeRisk:
        case Objective::MaximizeRatio: add_risk(1.0); break;
        case Objective::MaximizeReturn:
            for (Eigen::Index i = 0; i < n; ++i) b.add_cost(a.x0 + i, -prior.mu[i]);
            break;
        case Objective::MaximizeUtility:
            for (Eigen::Index i = 0; i < n; ++i) b.add_cost(a.x0 + i, -prior.mu[i]);
            add_risk(spec.risk_aversion);
            break;
    }
    if (knobs.nu > 0.0) b.add_quadratic(a.x0, knobs.nu * prior.sigma);
    if (spec.l2_coef > 0.0) b.add_quadratic(a.x0, spec.l2_coef * Matrix::Identity(n, n));
    if (ctx.l1_active) {
        for (Eigen::Index i = 0; i < n; ++i) {
            if (ctx.lower[i] < 0.0) {
                // |x_i| <= a_i with a_i in the objective
                const auto aux = b.add_variables(1, 0.0, kInf);
                b.add_less_equal({{a.x0 + i, 1.0}, {aux, -1.0}}, 0.0, "l1");
                b.add_less_equal({{a.x0 + i, -1.0}, {aux, -1.0}}, 0.0, "l1");
                b.add_cost(aux, spec.l1_coef);
            } else {
                b.add_cost(a.x0 + i, spec.l1_coef);
            }
        }
    }
    return a;
}

Error diagnose(const Assembly& a, const conic::SolverSettings& settings) {
    static const std::vector<std::string> structural{"objective", "l1"};
    for (const auto& tag : a.builder.tags()) {
        if (std::find(structural.begin(), structural.end(), tag) != structural.end()) continue;
        const auto r = conic::solve(a.builder.build_without({tag}), settings);
        if (r.status == SolveStatus::Optimal || r.status == SolveStatus::Unbounded) {
            if (tag == "positive_expected_return") {
                return Error(ErrorCode::InfeasibleProblem,
                             "infeasible: no admissible portfolio has a positive expected return, so the ratio is "
                             "undefined (binding constraint: positive_expected_return)");
            }
            return Error(ErrorCode::InfeasibleProblem,
                         "infeasible: constraint '" + tag + "' cannot be met together with the others");
        }
    }
    return Error(ErrorCode::InfeasibleProblem, "infeasible: the constraint set is jointly infeasible");
}

struct Solution {
    Vector w;  ///< weights
    Vector x;  ///< decision vector the risk term acts on (w, or y in ratio mode)
};

Solution solve_once(const Context& ctx, const Knobs& knobs) {
    const Assembly a = assemble(ctx, knobs);
    const auto r = conic::solve(a.builder.build(), ctx.spec.solver);
    switch (r.status) {
        case SolveStatus::Optimal: break;
        case SolveStatus::Infeasible: throw diagnose(a, ctx.spec.solver);
        case SolveStatus::Unbounded:
            throw Error(ErrorCode::UnboundedProblem, "unbounded: the objective can be improved without limit; add "
                                                     "finite weight bounds or a risk cap");
        case SolveStatus::MaxIterations:
            throw Error(ErrorCode::SolverFailure,
                        "solver stopped after " + std::to_string(r.iterations) + " iterations without convergence");
    }
    Solution s;
    s.x = r.x.segment(a.x0, ctx.n);
    if (ctx.ratio) {
        const double t = r.x[a.t];
        if (!(t > 0.0)) throw Error(ErrorCode::SolverFailure, "ratio homogenization returned a non-positive scale");
        s.w = s.x / t;
    } else {
        s.w = s.x;
    }
    return s;
}

double deviation(const Context& ctx, const Vector& x) {
    return std::sqrt(std::max(0.0, x.dot(ctx.spec.prior.sigma * x)));
}

/**
 * Objectives containing c * sqrt(x' Sigma x) next to other terms use
 * sqrt(v) = min_s v / (2 s) + s / 2. For fixed s the problem is a QP; the
 * optimal s is the fixed point s = sqrt(v(x(s))), found by Illinois
 * regula falsi on g(s) = sqrt(v(x(s))) - s, which is decreasing in s.
 */
Solution solve_scaled(const Context& ctx, double nu) {
    if (!ctx.needs_scale) return solve_once(ctx, {nu, 0.0});

    constexpr double kFloor = 1e-12;
    Solution best = solve_once(ctx, {nu, 0.0});
    double s0 = std::max(deviation(ctx, best.x), kFloor);
    int evaluations = 0;
    auto g = [&](double s, Solution& out) {
        ++evaluations;
        out = solve_once(ctx, {nu, s});
        return deviation(ctx, out.x) - s;
    };

    Solution at;
    double g0 = g(s0, at);
    constexpr double tol = 1e-10;
    auto converged = [&](double s, double gs) { return std::abs(gs) <= tol * std::max(s, kFloor) + 1e-15; };
    if (converged(s0, g0)) return at;

    // bracket the root
    double lo = s0, hi = s0, g_lo = g0, g_hi = g0;
    Solution sol_lo = at, sol_hi = at;
    if (g0 > 0.0) {
        while (g_hi > 0.0) {
            if (evaluations > kScaleSearchEvaluations) throw Error(ErrorCode::SolverFailure, "scale search diverged");
            lo = hi, g_lo = g_hi, sol_lo = sol_hi;
            hi *= 4.0;
            g_hi = g(hi, sol_hi);
            if (converged(hi, g_hi)) return sol_hi;
        }
    } else {
        while (g_lo < 0.0) {
            if (lo <= kFloor) return sol_lo;  // zero-risk portfolio is optimal
            hi = lo, g_hi = g_lo, sol_hi = sol_lo;
            lo = std::max(lo / 4.0, kFloor);
            g_lo = g(lo, sol_lo);
            if (converged(lo, g_lo)) return sol_lo;
        }
    }

    int side = 0;
    while (evaluations < kScaleSearchEvaluations) {
        double s = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        if (!(s > lo && s < hi)) s = 0.5 * (lo + hi);
        Solution cur;
        const double gs = g(s, cur);
        if (converged(s, gs) || (hi - lo) <= 1e-14 * hi) return cur;
        if (gs > 0.0) {
            lo = s, g_lo = gs, sol_lo = cur;
            if (side == 1) g_hi *= 0.5;
            side = 1;
        } else {
            hi = s, g_hi = gs, sol_hi = cur;
            if (side == -1) g_lo *= 0.5;
            side = -1;
        }
    }
    throw Error(ErrorCode::SolverFailure, "standard-deviation scale search did not converge");
}

/**
 * A variance cap w' Sigma w <= c is enforced through its Lagrangian: the
 * objective gets nu * w' Sigma w and nu is bisected until the cap binds.
 */
Solution solve_with_caps(const Context& ctx) {
    Solution sol = solve_scaled(ctx, 0.0);
    if (!ctx.variance_cap) return sol;
    const double cap = *ctx.variance_cap;
    auto variance = [&](const Solution& s) { return s.w.dot(ctx.spec.prior.sigma * s.w); };
    const double slack = kCapSlack * std::max(cap, 1e-12);
    if (variance(sol) <= cap + slack) return sol;

    // is the cap reachable at all?
    ProblemSpec minvar = ctx.spec;
    minvar.objective = Objective::MinimizeRisk;
    minvar.risk_measure = RiskMeasure::variance();
    minvar.l1_coef = minvar.l2_coef = 0.0;
    minvar.constraints.risk_caps.erase(
        std::remove_if(minvar.constraints.risk_caps.begin(), minvar.constraints.risk_caps.end(),
                       [](const RiskCap& rc) { return is_quadratic(rc.measure); }),
        minvar.constraints.risk_caps.end());
    const Weights floor = optimize(minvar);
    if (floor.values.dot(ctx.spec.prior.sigma * floor.values) > cap + slack) {
        throw Error(ErrorCode::InfeasibleProblem,
                    "infeasible: constraint 'risk_cap:variance' is below the minimum attainable variance");
    }

    const double unit = std::max(ctx.spec.prior.sigma.diagonal().maxCoeff(), 1e-300);
    double lo = 0.0;
    double hi = 1.0 / unit;
    Solution at_hi = solve_scaled(ctx, hi);
    for (int i = 0; variance(at_hi) > cap + slack; ++i) {
        if (i > 80) throw Error(ErrorCode::SolverFailure, "variance cap multiplier search diverged");
        lo = hi;
        hi *= 10.0;
        at_hi = solve_scaled(ctx, hi);
    }
    for (int i = 0; i < kCapBisections; ++i) {
        if (cap - variance(at_hi) <= slack || hi - lo <= 1e-15 * hi) break;
        const double mid = lo > 0.0 ? std::sqrt(lo * hi) : 0.5 * hi;
        Solution at_mid = solve_scaled(ctx, mid);
        if (variance(at_mid) > cap + slack) {
            lo = mid;
        } else {
            hi = mid;
            at_hi = std::move(at_mid);
        }
    }
    return at_hi;
}

}  // namespace

Weights optimize(const ProblemSpec& spec) {
    spec.validate();
    Context ctx = make_context(spec);
    const Solution sol = solve_with_caps(ctx);
    Weights out;
    out.assets = ctx.labels;
    out.values = sol.w;
    // snap solver round-off (|excess| ~ 1e-20) back onto the weight bounds
    for (Eigen::Index i = 0; i < ctx.n; ++i) {
        double& w = out.values[i];
        if (w < ctx.lower[i] && w > ctx.lower[i] - kCapSlack) w = ctx.lower[i];
        if (w > ctx.upper[i] && w < ctx.upper[i] + kCapSlack) w = ctx.upper[i];
    }
    out.warnings = std::move(ctx.warnings);
    return out;
}

Frontier efficient_frontier(const ProblemSpec& spec, int size, int threads) {
    if (size < 1) throw Error(ErrorCode::InvalidArgument, "frontier size must be at least 1");
    ProblemSpec base = spec;
    base.objective = Objective::MinimizeRisk;
    base.validate();

    Frontier frontier;
    frontier.assets = base.prior.labels();
    const Weights w_min = optimize(base);
    frontier.warnings = w_min.warnings;
    auto point = [&](const Vector& w, double target) {
        return FrontierPoint{w, target, base.prior.mu.dot(w), portfolio_risk(base.risk_measure, base.prior, w)};
    };
    const double r_min = base.prior.mu.dot(w_min.values);
    if (size == 1) {
        frontier.points.push_back(point(w_min.values, r_min));
        return frontier;
    }

    ProblemSpec top = base;
    top.objective = Objective::MaximizeReturn;
    top.l1_coef = top.l2_coef = 0.0;
    const double r_max = std::max(r_min, base.prior.mu.dot(optimize(top).values));

    std::vector<double> targets(static_cast<std::size_t>(size));
    for (int i = 0; i < size; ++i) {
        targets[static_cast<std::size_t>(i)] = r_min + (r_max - r_min) * static_cast<double>(i) / (size - 1);
    }
    auto solved = parallel_map<std::optional<FrontierPoint>>(
        targets.size(), threads, [&](std::size_t i) -> std::optional<FrontierPoint> {
            if (i == 0) return point(w_min.values, targets[0]);
            ProblemSpec at = base;
            at.constraints.min_return = targets[i];
            try {
                return point(optimize(at).values, targets[i]);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::InfeasibleProblem) throw;
                return std::nullopt;
            }
        });
    for (std::size_t i = 0; i < solved.size(); ++i) {
        if (solved[i]) {
            frontier.points.push_back(std::move(*solved[i]));
        } else {
            frontier.warnings.push_back("frontier target " + format_number(targets[i]) + " is infeasible; point dropped");
        }
    }
    return frontier;
}

}  // namespace quantfolio
