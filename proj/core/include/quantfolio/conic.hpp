/**
 * @file conic.hpp
 * @brief Dense convex QP solver and the linear reformulations of the risk measures.
 *
 * The solver handles
 *
 *     minimize    0.5 x' P x + q' x
 *     subject to  A_eq x  = b_eq
 *                 G x    <= h
 *                 lb <= x <= ub
 *
 * with an operator-splitting (ADMM) iteration on the stacked form
 * l <= A x <= u. The data are Ruiz-equilibrated, the penalty is adapted on a
 * fixed iteration schedule, and once the iterates settle the solver guesses
 * the active set and solves the reduced KKT system exactly ("polish"). A
 * polished point is accepted only if it passes a full KKT check, so a bad
 * guess costs time but never accuracy.
 *
 * Everything is sequential and allocation order is fixed; identical inputs
 * give bit-identical outputs.
 */
#pragma once

#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "quantfolio/market_data.hpp"
#include "quantfolio/measures.hpp"

namespace quantfolio::conic {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
    Matrix P;     ///< n x n symmetric PSD; may be empty (treated as zero)
    Vector q;     ///< n
    Matrix A_eq;  ///< m_eq x n
    Vector b_eq;
    Matrix G;     ///< m_in x n
    Vector h;
    Vector lb;    ///< n, or empty for -inf
    Vector ub;    ///< n, or empty for +inf

    Eigen::Index variables() const { return q.size(); }
    void validate() const;
};

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIterations };

std::string_view to_string(SolveStatus status) noexcept;

struct SolverSettings {
    double eps_abs = 1e-8;
    double eps_rel = 1e-8;
    double eps_infeasible = 1e-5;
    int max_iterations = 20000;
    double rho = 0.1;
    double sigma = 1e-6;
    double alpha = 1.6;        ///< over-relaxation
    int scaling_iterations = 10;
    int check_interval = 10;
    int adapt_interval = 50;   ///< iterations between penalty updates
    bool polish = true;
    double polish_delta = 1e-7;
    int polish_refinements = 30;
};

struct SolveResult {
    Vector x;
    Vector y_eq;      ///< multipliers of A_eq x = b_eq
    Vector y_ineq;    ///< multipliers of G x <= h (non-negative)
    double objective = 0.0;
    SolveStatus status = SolveStatus::MaxIterations;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    bool polished = false;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Statuses other than Optimal are reported in-band; only malformed input throws.
SolveResult solve(const QpProblem& problem, const SolverSettings& settings = {});

/// One linear term list: sum of coef * x[index].
using Terms = std::vector<std::pair<Eigen::Index, double>>;

/**
 * Epigraph representation of a risk measure over local variables
 * v = [w (N) | aux (aux_count)]:
 *
 *     risk(w) = min_aux  v' Q v + cost' v   subject to  G v <= h
 *
 * Q is only non-zero for Variance. Every row has h == 0, so blocks are
 * positively homogeneous and can be reused under the ratio substitution.
 */
struct RiskBlock {
    Eigen::Index assets = 0;
    Eigen::Index aux_count = 0;
    Matrix G;
    Vector h;
    Vector cost;
    Matrix quad;  ///< assets x assets, empty unless Variance

    Eigen::Index width() const { return assets + aux_count; }
    Eigen::Index rows() const { return G.rows(); }
};

/// `scenarios` is T x N. `sigma` is required for Variance. StandardDeviation has
/// no linear or quadratic epigraph form and raises UnsupportedMeasure.
RiskBlock reformulate_risk(const RiskMeasure& measure, const Matrix& scenarios, const Matrix* sigma = nullptr);

/// Minimizes the block's auxiliaries for a fixed weight vector and returns the optimum.
double evaluate_block(const RiskBlock& block, const Vector& weights, const SolverSettings& settings = {});

/**
 * Incremental QP assembly with named constraint rows. Rows carry a tag so
 * callers can report which group of constraints made a problem infeasible.
 */
class QpBuilder {
public:
    /// Appends `count` variables and returns the index of the first.
    Eigen::Index add_variables(Eigen::Index count, double lower = -kInf, double upper = kInf);
    Eigen::Index variables() const { return static_cast<Eigen::Index>(lower_.size()); }

    void set_bounds(Eigen::Index index, double lower, double upper);
    void add_cost(Eigen::Index index, double coef);
    /// Adds x_block' Q x_block to the objective (no 1/2 factor).
    void add_quadratic(Eigen::Index offset, const Matrix& q);

    void add_equality(Terms terms, double rhs, std::string tag);
    void add_less_equal(Terms terms, double rhs, std::string tag);

    /**
     * Places a risk block with its weight columns mapped to `weight_columns`
     * (one entry per asset) and returns the linear expression of the risk
     * value. The block's quadratic part is left to the caller.
     */
    Terms place(const RiskBlock& block, const std::vector<Eigen::Index>& weight_columns, const std::string& tag);

    QpProblem build() const;
    /// Same problem with every row whose tag is in `drop` removed.
    QpProblem build_without(const std::vector<std::string>& drop) const;
    std::vector<std::string> tags() const;

private:
    struct Row {
        Terms terms;
        double rhs = 0.0;
        bool equality = false;
        std::string tag;
    };

    std::vector<double> lower_;
    std::vector<double> upper_;
    std::vector<double> cost_;
    std::vector<std::pair<Eigen::Index, Matrix>> quad_;
    std::vector<Row> rows_;
};

}  // namespace quantfolio::conic
