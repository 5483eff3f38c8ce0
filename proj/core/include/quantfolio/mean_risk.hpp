/**
 * @file mean_risk.hpp
 * @brief Convex mean-risk optimization: four objectives over any supported
 * risk measure, with weight constraints, L1/L2 regularization and risk caps.
 *
 * Objectives (all subject to the same constraint set, L(w) = l1 |w|_1 + l2 |w|_2^2):
 *
 *   MinimizeRisk      min  risk(w) + L(w)
 *   MaximizeReturn    max  mu'w - L(w)
 *   MaximizeUtility   max  mu'w - lambda risk(w) - L(w)
 *   MaximizeRatio     max  mu'w / risk(w)
 *
 * Scenario-based measures enter as linear epigraph blocks, variance as a
 * quadratic term. Standard deviation and variance caps are handled outside
 * the QP (see mean_risk.cpp) so every subproblem stays a convex QP.
 */
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quantfolio/conic.hpp"
#include "quantfolio/measures.hpp"
#include "quantfolio/portfolio.hpp"
#include "quantfolio/priors.hpp"

namespace quantfolio {

enum class Objective { MinimizeRisk, MaximizeReturn, MaximizeUtility, MaximizeRatio };

std::string to_string(Objective objective);
Objective parse_objective(const std::string& text);

/// a' w >= lower
struct LinearConstraint {
    std::string name;
    Vector coefficients;
    double lower = 0.0;
};

struct AssetCap {
    std::string asset;
    double upper = 1.0;
};

struct RiskCap {
    RiskMeasure measure;
    double bound = 0.0;
};

struct Constraints {
    double budget = 1.0;
    /// Per-asset bounds; empty means the defaults below for every asset.
    Vector lower;
    Vector upper;
    double default_lower = 0.0;
    double default_upper = 1.0;
    std::vector<AssetCap> asset_caps;  ///< named upper caps, e.g. {"AAPL", 0.2}
    std::vector<LinearConstraint> linear;
    std::optional<double> min_return;
    std::vector<RiskCap> risk_caps;
};

struct ProblemSpec {
    Objective objective = Objective::MinimizeRisk;
    RiskMeasure risk_measure = RiskMeasure::variance();
    double risk_aversion = 1.0;  ///< lambda for MaximizeUtility
    Prior prior;
    Constraints constraints;
    double l1_coef = 0.0;
    double l2_coef = 0.0;
    std::optional<int> frontier_size;
    conic::SolverSettings solver;

    /// Throws InvalidArgument / DimensionMismatch for malformed specs.
    void validate() const;
};

/**
 * Solves the problem described by `spec`. Throws InfeasibleProblem (the message names the
 * constraint group whose removal restores feasibility), UnboundedProblem or
 * SolverFailure.
 */
Weights optimize(const ProblemSpec& spec);

/// Risk of `weights` under the prior: Sigma for variance / standard deviation,
/// the scenario matrix (uncompounded drawdowns) otherwise.
double portfolio_risk(const RiskMeasure& measure, const Prior& prior, const Vector& weights);

struct FrontierPoint {
    Vector weights;
    double target_return = 0.0;
    double expected_return = 0.0;
    double risk = 0.0;  ///< in the units of the problem's risk measure
};

struct Frontier {
    std::vector<std::string> assets;
    std::vector<FrontierPoint> points;  ///< ordered by target return
    std::vector<std::string> warnings;  ///< dropped (infeasible) targets
};

/**
 * Sweeps `size` equally spaced return targets between the minimum-risk
 * portfolio's return and the maximum achievable return, solving
 * MinimizeRisk at each. Points are solved in parallel on `threads` workers;
 * the result does not depend on the thread count.
 */
Frontier efficient_frontier(const ProblemSpec& spec, int size, int threads = 1);

}  // namespace quantfolio
