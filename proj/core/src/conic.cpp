#include "quantfolio/conic.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "quantfolio/error.hpp"

namespace quantfolio::conic {

namespace {

constexpr double kMinScaling = 1e-4;
constexpr double kMaxScaling = 1e4;
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;
constexpr int kMaxPolishAttempts = 40;
constexpr int kInteriorAfterFailedPolish = 2;

double inf_norm(const Vector& v) { return v.size() > 0 ? v.cwiseAbs().maxCoeff() : 0.0; }

/// The problem in l <= A x <= u form, before scaling.
struct Stacked {
    Matrix P;
    Vector q;
    Matrix A;
    Vector l;
    Vector u;
    Eigen::Index m_eq = 0;
    Eigen::Index m_in = 0;
};

Stacked stack(const QpProblem& p) {
    const auto n = p.variables();
    Stacked s;
    s.P = p.P.size() > 0 ? Matrix(0.5 * (p.P + p.P.transpose())) : Matrix::Zero(n, n);
    s.q = p.q;
    s.m_eq = p.A_eq.rows();
    s.m_in = p.G.rows();

    std::vector<Eigen::Index> bounded;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double lo = p.lb.size() > 0 ? p.lb[j] : -kInf;
        const double hi = p.ub.size() > 0 ? p.ub[j] : kInf;
        if (std::isfinite(lo) || std::isfinite(hi)) bounded.push_back(j);
    }
    const auto m = s.m_eq + s.m_in + static_cast<Eigen::Index>(bounded.size());
    s.A = Matrix::Zero(m, n);
    s.l.resize(m);
    s.u.resize(m);
    if (s.m_eq > 0) {
        s.A.topRows(s.m_eq) = p.A_eq;
        s.l.head(s.m_eq) = p.b_eq;
        s.u.head(s.m_eq) = p.b_eq;
    }
    if (s.m_in > 0) {
        s.A.middleRows(s.m_eq, s.m_in) = p.G;
        s.l.segment(s.m_eq, s.m_in).setConstant(-kInf);
        s.u.segment(s.m_eq, s.m_in) = p.h;
    }
    Eigen::Index row = s.m_eq + s.m_in;
    for (auto j : bounded) {
        s.A(row, j) = 1.0;
        s.l[row] = p.lb.size() > 0 ? p.lb[j] : -kInf;
        s.u[row] = p.ub.size() > 0 ? p.ub[j] : kInf;
        ++row;
    }
    return s;
}

struct Scaling {
    Vector D;  // variables
    Vector E;  // constraints
    double c = 1.0;
};

double clamp_scale(double norm) {
    if (norm < kMinScaling) return 1.0;
    return std::min(norm, kMaxScaling);
}

/// Ruiz equilibration of the KKT matrix followed by cost scaling. Modifies P, q, A in place.
Scaling equilibrate(Matrix& P, Vector& q, Matrix& A, int iterations) {
    const auto n = P.rows();
    const auto m = A.rows();
    Scaling s{Vector::Ones(n), Vector::Ones(m), 1.0};
    for (int it = 0; it < iterations; ++it) {
        Vector dd(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            double norm = P.col(j).cwiseAbs().maxCoeff();
            if (m > 0) norm = std::max(norm, A.col(j).cwiseAbs().maxCoeff());
            dd[j] = 1.0 / std::sqrt(clamp_scale(norm));
        }
        Vector de(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            de[i] = 1.0 / std::sqrt(clamp_scale(A.row(i).cwiseAbs().maxCoeff()));
        }
        P = dd.asDiagonal() * P * dd.asDiagonal();
        q = dd.cwiseProduct(q);
        A = de.asDiagonal() * A * dd.asDiagonal();
        s.D = s.D.cwiseProduct(dd);
        s.E = s.E.cwiseProduct(de);

        double mean_col = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) mean_col += P.col(j).cwiseAbs().maxCoeff();
        mean_col /= static_cast<double>(n);
        const double gamma = 1.0 / clamp_scale(std::max(mean_col, inf_norm(q)));
        P *= gamma;
        q *= gamma;
        s.c *= gamma;
    }
    return s;
}

enum class RowState : signed char { Inactive = 0, Lower = -1, Upper = 1, Fixed = 2 };

struct Residuals {
    double prim = 0.0;
    double dual = 0.0;
    double eps_prim = 0.0;
    double eps_dual = 0.0;
    // scaled, normalized residuals for penalty adaptation
    double prim_rel = 0.0;
    double dual_rel = 0.0;
};

struct KktCheck {
    bool ok = false;
    double prim = 0.0;
    double dual = 0.0;
};

/// Full KKT check of an unscaled candidate (x, y) against the stacked problem.
KktCheck check_kkt(const Stacked& s, const Vector& x, const Vector& y, const std::vector<RowState>& state,
                   const SolverSettings& settings) {
    const Vector ax = s.A * x;
    const Vector px = s.P * x;
    const Vector aty = s.A.transpose() * y;
    KktCheck out;
    for (Eigen::Index i = 0; i < ax.size(); ++i) {
        out.prim = std::max({out.prim, s.l[i] - ax[i], ax[i] - s.u[i]});
    }
    out.dual = inf_norm(px + s.q + aty);
    const double eps_prim = settings.eps_abs + settings.eps_rel * inf_norm(ax);
    const double eps_dual =
        settings.eps_abs + settings.eps_rel * std::max({inf_norm(px), inf_norm(aty), inf_norm(s.q)});
    const double sign_tol = eps_dual;
    bool signs = true;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        switch (state[static_cast<std::size_t>(i)]) {
            case RowState::Lower: signs = signs && y[i] <= sign_tol; break;
            case RowState::Upper: signs = signs && y[i] >= -sign_tol; break;
            default: break;
        }
    }
    out.ok = signs && out.prim <= eps_prim && out.dual <= eps_dual && x.allFinite() && y.allFinite();
    return out;
}

double objective_value(const Stacked& s, const Vector& x) { return 0.5 * x.dot(s.P * x) + s.q.dot(x); }

struct Polished {
    Vector x;
    Vector y;
    KktCheck kkt;
};

using SparseMatrix = Eigen::SparseMatrix<double>;

/**
 * Factorization of a quasi-definite KKT matrix
 *
 *     [ H    A' ]
 *     [ A  -d I ]
 *
 * The constraint rows of reformulated problems touch few columns, so the
 * matrix is assembled sparse and factored with LDL'; LU with pivoting is the
 * fallback when the regularization is too weak for a pivot-free factorization.
 */
class KktFactor {
public:
    KktFactor(const SparseMatrix& h, const SparseMatrix& a, double delta) : n_(h.rows()) {
        const auto m = a.rows();
        std::vector<Eigen::Triplet<double>> entries;
        entries.reserve(static_cast<std::size_t>(h.nonZeros() + 2 * a.nonZeros() + m));
        for (Eigen::Index j = 0; j < h.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(h, j); it; ++it) entries.emplace_back(it.row(), it.col(), it.value());
        }
        for (Eigen::Index j = 0; j < a.outerSize(); ++j) {
            for (SparseMatrix::InnerIterator it(a, j); it; ++it) {
                entries.emplace_back(n_ + it.row(), it.col(), it.value());
                entries.emplace_back(it.col(), n_ + it.row(), it.value());
            }
        }
        for (Eigen::Index i = 0; i < m; ++i) entries.emplace_back(n_ + i, n_ + i, -delta);
        matrix_.resize(n_ + m, n_ + m);
        matrix_.setFromTriplets(entries.begin(), entries.end());
        ldlt_.compute(matrix_);
        if (ldlt_.info() != Eigen::Success || !ldlt_.vectorD().allFinite()) {
            use_lu_ = true;
            lu_.compute(matrix_);
            ok_ = lu_.info() == Eigen::Success;
        }
    }

    bool ok() const { return ok_; }
    const SparseMatrix& matrix() const { return matrix_; }
    /// Solve with a fixed number of iterative-refinement steps against the assembled matrix.
    Vector solve(const Vector& rhs, int refinements = 2) const {
        Vector sol = raw_solve(rhs);
        for (int i = 0; i < refinements; ++i) sol += raw_solve(rhs - matrix_ * sol);
        return sol;
    }

private:
    Vector raw_solve(const Vector& rhs) const { return use_lu_ ? Vector(lu_.solve(rhs)) : Vector(ldlt_.solve(rhs)); }

    Eigen::Index n_;
    SparseMatrix matrix_;
    Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
    mutable Eigen::SparseLU<SparseMatrix> lu_;
    bool use_lu_ = false;
    bool ok_ = true;
};

SparseMatrix with_diagonal(const SparseMatrix& m, double value) {
    SparseMatrix identity(m.rows(), m.cols());
    identity.setIdentity();
    return m + value * identity;
}

struct ReducedSolution {
    Vector x;
    Vector y;  // full length, zero on inactive rows
};

/**
 * Solves the equality-constrained QP on the rows marked active with proximal
 * point iterations on the regularized KKT matrix
 *
 *     [ P + d I   A_r' ] [x]   [ -q + d x_k  ]
 *     [ A_r      -d I  ] [y] = [ b_r - d y_k ]
 *
 * centred at the ADMM iterate, so directions left free by the active set stay
 * where ADMM put them. Everything here is in scaled space.
 */
std::optional<ReducedSolution> solve_reduced(const Matrix& Ps, const Vector& qs, const Matrix& As, const Vector& ls,
                                             const Vector& us, const Vector& x, const Vector& y,
                                             const std::vector<RowState>& state, const SolverSettings& settings) {
    const auto n = Ps.rows();
    std::vector<Eigen::Index> active;
    for (std::size_t i = 0; i < state.size(); ++i) {
        if (state[i] != RowState::Inactive) active.push_back(static_cast<Eigen::Index>(i));
    }
    const auto ma = static_cast<Eigen::Index>(active.size());
    const double delta = settings.polish_delta;

    Matrix rows(ma, n);
    Vector b(ma);
    Vector yk(ma);
    for (Eigen::Index k = 0; k < ma; ++k) {
        const auto i = active[static_cast<std::size_t>(k)];
        rows.row(k) = As.row(i);
        b[k] = state[static_cast<std::size_t>(i)] == RowState::Upper ? us[i] : ls[i];
        yk[k] = y[i];
    }
    const KktFactor lu(with_diagonal(Ps.sparseView(), delta), rows.sparseView(), delta);
    if (!lu.ok()) return std::nullopt;
    Vector xk = x;
    Vector rhs(n + ma);
    for (int it = 0; it < settings.polish_refinements; ++it) {
        rhs.head(n) = -qs + delta * xk;
        rhs.tail(ma) = b - delta * yk;
        const Vector sol = lu.solve(rhs);
        if (!sol.allFinite()) return std::nullopt;
        const double change = std::max(inf_norm(sol.head(n) - xk), inf_norm(sol.tail(ma) - yk));
        xk = sol.head(n);
        yk = sol.tail(ma);
        if (change <= 1e-15 * (1.0 + inf_norm(sol))) break;
    }

    ReducedSolution out{xk, Vector::Zero(As.rows())};
    for (Eigen::Index k = 0; k < ma; ++k) out.y[active[static_cast<std::size_t>(k)]] = yk[k];
    return out;
}

/// Polishes from a guessed active set; the result is only trusted after a full KKT check.
std::optional<Polished> polish(const Stacked& original, const Matrix& Ps, const Vector& qs, const Matrix& As,
                               const Vector& ls, const Vector& us, const Scaling& sc, const Vector& x,
                               const Vector& y, const std::vector<RowState>& state, const SolverSettings& settings) {
    const auto reduced = solve_reduced(Ps, qs, As, ls, us, x, y, state, settings);
    if (!reduced) return std::nullopt;
    Polished out;
    out.x = sc.D.cwiseProduct(reduced->x);
    out.y = sc.E.cwiseProduct(reduced->y) / sc.c;
    out.kkt = check_kkt(original, out.x, out.y, state, settings);
    return out;
}

struct InteriorPoint {
    Vector x;  // scaled space
    Vector y;  // scaled, stacked-row multipliers
    bool converged = false;
};

constexpr int kInteriorIterations = 100;

/**
 * Dense Mehrotra predictor-corrector on the scaled problem, used when the
 * splitting iterates are too degenerate for the active-set guess (typically
 * LPs whose auxiliaries are not unique). Finite sides of l <= Ax <= u become
 * slack rows; l == u rows are kept as equalities.
 */
InteriorPoint interior_point(const Stacked& original, const Matrix& Ps, const Vector& qs, const Matrix& As,
                             const Vector& ls, const Vector& us, const Scaling& sc, const SolverSettings& settings) {
    const auto n = Ps.rows();
    const auto m = As.rows();
    std::vector<Eigen::Index> eq_rows;
    std::vector<std::pair<Eigen::Index, double>> in_rows;  // (row, +1 for upper side, -1 for lower side)
    for (Eigen::Index i = 0; i < m; ++i) {
        if (ls[i] == us[i]) {
            eq_rows.push_back(i);
            continue;
        }
        if (std::isfinite(us[i])) in_rows.emplace_back(i, 1.0);
        if (std::isfinite(ls[i])) in_rows.emplace_back(i, -1.0);
    }
    const auto me = static_cast<Eigen::Index>(eq_rows.size());
    const auto mi = static_cast<Eigen::Index>(in_rows.size());
    Matrix Ae(me, n);
    Vector be(me);
    for (Eigen::Index k = 0; k < me; ++k) {
        Ae.row(k) = As.row(eq_rows[static_cast<std::size_t>(k)]);
        be[k] = ls[eq_rows[static_cast<std::size_t>(k)]];
    }
    Matrix G(mi, n);
    Vector h(mi);
    for (Eigen::Index k = 0; k < mi; ++k) {
        const auto [row, side] = in_rows[static_cast<std::size_t>(k)];
        G.row(k) = side * As.row(row);
        h[k] = side > 0 ? us[row] : -ls[row];
    }

    // rows of reformulated problems touch few columns; products use the sparse view
    const SparseMatrix Gs = G.sparseView();
    const SparseMatrix Ae_sparse = Ae.sparseView();
    const SparseMatrix Gt = Gs.transpose();

    Vector x = Vector::Zero(n);
    Vector ye = Vector::Zero(me);
    Vector s = (h - Gs * x).cwiseMax(1.0);
    Vector z = Vector::Ones(mi);

    auto assemble_y = [&] {
        Vector y = Vector::Zero(m);
        for (Eigen::Index k = 0; k < me; ++k) y[eq_rows[static_cast<std::size_t>(k)]] += ye[k];
        for (Eigen::Index k = 0; k < mi; ++k) {
            const auto [row, side] = in_rows[static_cast<std::size_t>(k)];
            y[row] += side * z[k];
        }
        return y;
    };

    auto max_step = [](const Vector& v, const Vector& dv) {
        double step = 1.0;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (dv[i] < 0.0) step = std::min(step, -v[i] / dv[i]);
        }
        return step;
    };

    const double reg = 1e-12;
    InteriorPoint out;
    for (int it = 0; it < kInteriorIterations; ++it) {
        const Vector rd = Ps * x + qs + Ae.transpose() * ye + Gt * z;
        const Vector rp = Ae * x - be;
        const Vector rg = Gs * x + s - h;
        const double mu = mi > 0 ? s.dot(z) / static_cast<double>(mi) : 0.0;

        // convergence is judged on the unscaled problem
        const Vector xu = sc.D.cwiseProduct(x);
        const Vector yu = sc.E.cwiseProduct(assemble_y()) / sc.c;
        const KktCheck kkt = check_kkt(original, xu, yu, std::vector<RowState>(static_cast<std::size_t>(m)), settings);
        const double complementarity = mi > 0 ? s.dot(z) / sc.c : 0.0;
        const double objective = std::abs(objective_value(original, xu));
        if (kkt.ok && complementarity <= 0.1 * settings.eps_abs + settings.eps_rel * objective) {
            out = {x, assemble_y(), true};
            return out;
        }

        const Vector w = z.cwiseQuotient(s);
        const SparseMatrix weighted = Gt * w.asDiagonal() * Gs;
        const SparseMatrix hessian = SparseMatrix(Ps.sparseView()) + weighted;
        const KktFactor lu(with_diagonal(hessian, reg), Ae_sparse, reg);
        if (!lu.ok()) break;

        // rc is the complementarity right-hand side: S dz + Z ds = rc
        auto direction = [&](const Vector& rc, Vector& dx, Vector& dy, Vector& ds, Vector& dz) {
            Vector rhs(n + me);
            rhs.head(n) = -rd - Gt * (rc + z.cwiseProduct(rg)).cwiseQuotient(s);
            rhs.tail(me) = -rp;
            Vector sol = lu.solve(rhs);
            for (int refine = 0; refine < 2; ++refine) {
                Vector resid = rhs;
                resid.head(n) -= hessian * sol.head(n) + Ae_sparse.transpose() * sol.tail(me);
                resid.tail(me) -= Ae_sparse * sol.head(n);
                sol += lu.solve(resid);
            }
            dx = sol.head(n);
            dy = sol.tail(me);
            ds = -rg - Gs * dx;
            dz = (rc - z.cwiseProduct(ds)).cwiseQuotient(s);
        };

        Vector dx, dy, ds, dz;
        direction(-s.cwiseProduct(z), dx, dy, ds, dz);
        const double affine = std::min(max_step(s, ds), max_step(z, dz));
        const double mu_affine =
            mi > 0 ? (s + affine * ds).dot(z + affine * dz) / static_cast<double>(mi) : 0.0;
        const double centering = mu > 0.0 ? std::pow(mu_affine / mu, 3) : 0.0;
        const Vector rc = -s.cwiseProduct(z) - ds.cwiseProduct(dz) + Vector::Constant(mi, centering * mu);
        direction(rc, dx, dy, ds, dz);
        const double step = std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
        x += step * dx;
        ye += step * dy;
        s += step * ds;
        z += step * dz;
        if (!x.allFinite() || !s.allFinite() || !z.allFinite()) break;
    }
    out = {x, assemble_y(), false};
    return out;
}

double duality_gap(const Stacked& s, const Vector& x, const Vector& y) {
    double support = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (y[i] > 0.0 && std::isfinite(s.u[i])) support += s.u[i] * y[i];
        if (y[i] < 0.0 && std::isfinite(s.l[i])) support += s.l[i] * y[i];
    }
    return std::abs(x.dot(s.P * x) + s.q.dot(x) + support);
}

}  // namespace

std::string_view to_string(SolveStatus status) noexcept {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::Unbounded: return "unbounded";
        case SolveStatus::MaxIterations: return "max_iterations";
    }
    return "unknown";
}

void QpProblem::validate() const {
    const auto n = variables();
    if (n == 0) throw Error(ErrorCode::InvalidArgument, "QP has no variables");
    auto fail = [](const char* what) { throw Error(ErrorCode::DimensionMismatch, what); };
    if (P.size() > 0 && (P.rows() != n || P.cols() != n)) fail("P must be n x n");
    if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n)) fail("A_eq/b_eq shape");
    if (G.rows() != h.size() || (G.rows() > 0 && G.cols() != n)) fail("G/h shape");
    if (lb.size() != 0 && lb.size() != n) fail("lb length");
    if (ub.size() != 0 && ub.size() != n) fail("ub length");
    if (!q.allFinite() || !A_eq.allFinite() || !b_eq.allFinite() || !G.allFinite() || (P.size() > 0 && !P.allFinite())) {
        throw Error(ErrorCode::InvalidArgument, "QP data must be finite");
    }
    if (P.size() > 0) {
        const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
        if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
            throw Error(ErrorCode::InvalidArgument, "P must be symmetric");
        }
    }
}

SolveResult solve(const QpProblem& problem, const SolverSettings& settings) {
    problem.validate();
    const Stacked original = stack(problem);
    const auto n = original.q.size();
    const auto m = original.A.rows();

    for (Eigen::Index i = 0; i < m; ++i) {
        if (original.l[i] > original.u[i]) {
            SolveResult r;
            r.x = Vector::Zero(n);
            r.status = SolveStatus::Infeasible;
            return r;
        }
    }

    Matrix Ps = original.P;
    Vector qs = original.q;
    Matrix As = original.A;
    const Scaling sc = equilibrate(Ps, qs, As, settings.scaling_iterations);
    Vector ls = sc.E.cwiseProduct(original.l);
    Vector us = sc.E.cwiseProduct(original.u);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!std::isfinite(original.l[i])) ls[i] = -kInf;
        if (!std::isfinite(original.u[i])) us[i] = kInf;
    }

    std::vector<bool> is_equality(static_cast<std::size_t>(m));
    std::vector<bool> is_free(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        is_equality[static_cast<std::size_t>(i)] = original.l[i] == original.u[i];
        is_free[static_cast<std::size_t>(i)] = !std::isfinite(original.l[i]) && !std::isfinite(original.u[i]);
    }

    double rho = settings.rho;
    Vector rho_vec(m);
    auto set_rho = [&](double value) {
        rho = std::clamp(value, kRhoMin, kRhoMax);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            rho_vec[i] = is_free[k] ? kRhoMin : is_equality[k] ? std::min(kRhoEqualityFactor * rho, kRhoMax) : rho;
        }
    };
    set_rho(settings.rho);

    const SparseMatrix As_sparse = As.sparseView();
    const SparseMatrix As_t = As_sparse.transpose();
    const SparseMatrix Ps_sparse = Ps.sparseView();
    Eigen::SimplicialLLT<SparseMatrix> llt;
    auto factor = [&] {
        const SparseMatrix weighted = As_t * rho_vec.asDiagonal() * As_sparse;
        llt.compute(with_diagonal(Ps_sparse + weighted, settings.sigma));
        if (llt.info() != Eigen::Success) {
            throw Error(ErrorCode::SolverFailure, "KKT factorization failed; is P positive semidefinite?");
        }
    };
    factor();

    Vector x = Vector::Zero(n);
    Vector z = Vector::Zero(m);
    Vector y = Vector::Zero(m);
    Vector x_prev = x;
    Vector y_prev = y;
    const double alpha = settings.alpha;

    auto unscaled_x = [&](const Vector& xs) { return Vector(sc.D.cwiseProduct(xs)); };
    auto unscaled_y = [&](const Vector& ys) { return Vector(sc.E.cwiseProduct(ys) / sc.c); };

    auto residuals = [&]() {
        Residuals r;
        const Vector ax = As * x;
        const Vector px = Ps * x;
        const Vector aty = As.transpose() * y;
        const Vector einv = sc.E.cwiseInverse();
        const Vector dinv = sc.D.cwiseInverse();
        r.prim = m > 0 ? inf_norm(einv.cwiseProduct(ax - z)) : 0.0;
        r.dual = inf_norm(dinv.cwiseProduct(px + qs + aty)) / sc.c;
        const double prim_scale = m > 0 ? std::max(inf_norm(einv.cwiseProduct(ax)), inf_norm(einv.cwiseProduct(z))) : 0.0;
        const double dual_scale = std::max({inf_norm(dinv.cwiseProduct(px)), inf_norm(dinv.cwiseProduct(aty)),
                                            inf_norm(dinv.cwiseProduct(qs))}) / sc.c;
        r.eps_prim = settings.eps_abs + settings.eps_rel * prim_scale;
        r.eps_dual = settings.eps_abs + settings.eps_rel * dual_scale;
        const double tiny = 1e-30;
        r.prim_rel = m > 0 ? inf_norm(ax - z) / std::max({inf_norm(ax), inf_norm(z), tiny}) : 0.0;
        r.dual_rel = inf_norm(px + qs + aty) / std::max({inf_norm(px), inf_norm(aty), inf_norm(qs), tiny});
        return r;
    };

    auto primal_infeasible = [&]() {
        if (m == 0) return false;
        Vector dy = y - y_prev;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!std::isfinite(us[i]) && dy[i] > 0.0) dy[i] = 0.0;
            if (!std::isfinite(ls[i]) && dy[i] < 0.0) dy[i] = 0.0;
        }
        const double norm_dy = inf_norm(sc.E.cwiseProduct(dy));
        if (norm_dy <= settings.eps_infeasible) return false;
        double support = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (dy[i] > 0.0) support += us[i] * dy[i];
            if (dy[i] < 0.0) support += ls[i] * dy[i];
        }
        if (!(support < -settings.eps_infeasible * norm_dy)) return false;
        const Vector aty = sc.D.cwiseInverse().cwiseProduct(As.transpose() * dy);
        return inf_norm(aty) < settings.eps_infeasible * norm_dy;
    };

    auto dual_infeasible = [&]() {
        const Vector dx = x - x_prev;
        const double norm_dx = inf_norm(sc.D.cwiseProduct(dx));
        if (norm_dx <= settings.eps_infeasible) return false;
        const double tol = settings.eps_infeasible * norm_dx;
        if (!(qs.dot(dx) < -sc.c * tol)) return false;
        if (inf_norm(sc.D.cwiseInverse().cwiseProduct(Ps * dx)) >= sc.c * tol) return false;
        const Vector adx = sc.E.cwiseInverse().cwiseProduct(As * dx);
        for (Eigen::Index i = 0; i < m; ++i) {
            const bool lo = std::isfinite(ls[i]);
            const bool hi = std::isfinite(us[i]);
            if (lo && hi && std::abs(adx[i]) >= tol) return false;
            if (lo && !hi && adx[i] <= -tol) return false;
            if (!lo && hi && adx[i] >= tol) return false;
        }
        return true;
    };

    auto active_set = [&]() {
        std::vector<RowState> state(static_cast<std::size_t>(m), RowState::Inactive);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (is_equality[k]) state[k] = RowState::Fixed;
            else if (z[i] - ls[i] < -y[i]) state[k] = RowState::Lower;
            else if (us[i] - z[i] < y[i]) state[k] = RowState::Upper;
        }
        return state;
    };

    SolveResult result;
    auto finish = [&](SolveStatus status, const Vector& xu, const Vector& yu, bool polished, int iterations,
                      double prim, double dual) {
        result.status = status;
        result.x = xu;
        result.y_eq = yu.head(original.m_eq);
        result.y_ineq = yu.segment(original.m_eq, original.m_in);
        result.objective = objective_value(original, xu);
        result.gap = duality_gap(original, xu, yu);
        result.iterations = iterations;
        result.polished = polished;
        result.primal_residual = prim;
        result.dual_residual = dual;
        return result;
    };

    std::vector<RowState> last_polished_set;
    int polish_attempts = 0;
    int last_polish_iteration = -1000;
    auto try_polish = [&](int iteration) -> std::optional<Polished> {
        if (!settings.polish || polish_attempts >= kMaxPolishAttempts) return std::nullopt;
        auto state = active_set();
        if (state == last_polished_set) return std::nullopt;
        last_polished_set = state;
        ++polish_attempts;
        last_polish_iteration = iteration;
        auto p = polish(original, Ps, qs, As, ls, us, sc, x, y, state, settings);
        if (p && p->kkt.ok) return p;
        return std::nullopt;
    };

    bool interior_tried = false;
    auto try_interior = [&]() -> std::optional<Polished> {
        if (interior_tried) return std::nullopt;
        interior_tried = true;
        const InteriorPoint ip = interior_point(original, Ps, qs, As, ls, us, sc, settings);
        if (!ip.converged) return std::nullopt;
        // the interior solution is strictly complementary, so its active set is a good polish guess
        const Vector ax = As * ip.x;
        std::vector<RowState> state(static_cast<std::size_t>(m), RowState::Inactive);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto k = static_cast<std::size_t>(i);
            if (is_equality[k]) state[k] = RowState::Fixed;
            else if (ip.y[i] > 0.0 && us[i] - ax[i] < ip.y[i]) state[k] = RowState::Upper;
            else if (ip.y[i] < 0.0 && ax[i] - ls[i] < -ip.y[i]) state[k] = RowState::Lower;
        }
        if (settings.polish) {
            auto p = polish(original, Ps, qs, As, ls, us, sc, ip.x, ip.y, state, settings);
            if (p && p->kkt.ok) return p;
        }
        Polished out;
        out.x = unscaled_x(ip.x);
        out.y = unscaled_y(ip.y);
        out.kkt = check_kkt(original, out.x, out.y, std::vector<RowState>(static_cast<std::size_t>(m)), settings);
        return out;
    };

    Vector rhs(n);
    Vector x_tilde(n);
    Vector z_relaxed(m);
    for (int k = 1; k <= settings.max_iterations; ++k) {
        x_prev = x;
        y_prev = y;
        rhs = settings.sigma * x - qs;
        if (m > 0) rhs += As_t * (rho_vec.cwiseProduct(z) - y);
        x_tilde = llt.solve(rhs);
        x = alpha * x_tilde + (1.0 - alpha) * x;
        if (m > 0) {
            z_relaxed = alpha * (As_sparse * x_tilde) + (1.0 - alpha) * z;
            const Vector shifted = z_relaxed + y.cwiseQuotient(rho_vec);
            z = shifted.cwiseMax(ls).cwiseMin(us);
            y += rho_vec.cwiseProduct(z_relaxed - z);
        }

        if (k % settings.check_interval != 0 && k != settings.max_iterations) continue;

        const Residuals r = residuals();
        const bool converged = r.prim <= r.eps_prim && r.dual <= r.eps_dual;
        if (converged) {
            if (auto p = try_polish(k)) {
                return finish(SolveStatus::Optimal, p->x, p->y, true, k, p->kkt.prim, p->kkt.dual);
            }
            if (auto p = try_interior()) {
                return finish(SolveStatus::Optimal, p->x, p->y, true, k, p->kkt.prim, p->kkt.dual);
            }
            return finish(SolveStatus::Optimal, unscaled_x(x), unscaled_y(y), false, k, r.prim, r.dual);
        }
        if (primal_infeasible()) {
            return finish(SolveStatus::Infeasible, unscaled_x(x), unscaled_y(y), false, k, r.prim, r.dual);
        }
        if (dual_infeasible()) {
            return finish(SolveStatus::Unbounded, unscaled_x(x), unscaled_y(y), false, k, r.prim, r.dual);
        }

        const double prim_scale = (r.eps_prim - settings.eps_abs) / std::max(settings.eps_rel, 1e-300) + 1.0;
        const double dual_scale = (r.eps_dual - settings.eps_abs) / std::max(settings.eps_rel, 1e-300) + 1.0;
        const bool settled = r.prim <= 1e-3 * prim_scale && r.dual <= 1e-3 * dual_scale;
        if (settled && k - last_polish_iteration >= 2 * settings.check_interval) {
            if (auto p = try_polish(k)) {
                return finish(SolveStatus::Optimal, p->x, p->y, true, k, p->kkt.prim, p->kkt.dual);
            }
            if (polish_attempts >= kInteriorAfterFailedPolish) {
                if (auto p = try_interior()) {
                    return finish(SolveStatus::Optimal, p->x, p->y, true, k, p->kkt.prim, p->kkt.dual);
                }
            }
        }

        if (settings.adapt_interval > 0 && k % settings.adapt_interval == 0 && m > 0 && r.dual_rel > 0.0) {
            const double proposed = rho * std::sqrt(r.prim_rel / r.dual_rel);
            if (proposed > 5.0 * rho || proposed < 0.2 * rho) {
                set_rho(proposed);
                factor();
            }
        }
    }

    if (auto p = try_polish(settings.max_iterations)) {
        return finish(SolveStatus::Optimal, p->x, p->y, true, settings.max_iterations, p->kkt.prim, p->kkt.dual);
    }
    if (auto p = try_interior()) {
        return finish(SolveStatus::Optimal, p->x, p->y, true, settings.max_iterations, p->kkt.prim, p->kkt.dual);
    }
    const Residuals r = residuals();
    return finish(SolveStatus::MaxIterations, unscaled_x(x), unscaled_y(y), false, settings.max_iterations, r.prim,
                  r.dual);
}

// ---------------------------------------------------------------------------
// risk blocks

RiskBlock reformulate_risk(const RiskMeasure& measure, const Matrix& scenarios, const Matrix* sigma) {
    const auto t = scenarios.rows();
    const auto n = scenarios.cols();
    RiskBlock b;
    b.assets = n;
    auto allocate = [&](Eigen::Index aux, Eigen::Index rows) {
        b.aux_count = aux;
        b.G = Matrix::Zero(rows, n + aux);
        b.h = Vector::Zero(rows);
        b.cost = Vector::Zero(n + aux);
    };
    if (measure.kind != MeasureKind::Variance && t == 0) {
        throw Error(ErrorCode::EmptySeries, "scenario matrix is empty");
    }

    switch (measure.kind) {
        case MeasureKind::Variance: {
            if (sigma == nullptr || sigma->rows() != n || sigma->cols() != n) {
                throw Error(ErrorCode::DimensionMismatch, "variance block needs an N x N covariance");
            }
            allocate(0, 0);
            b.quad = *sigma;
            break;
        }
        case MeasureKind::StandardDeviation:
            throw Error(ErrorCode::UnsupportedMeasure, "standard deviation has no linear epigraph form");
        case MeasureKind::MeanAbsoluteDeviation: {
            // u_t >= +-(r_t - rbar)' w
            allocate(t, 2 * t);
            const Vector mean = scenarios.colwise().mean().transpose();
            for (Eigen::Index s = 0; s < t; ++s) {
                const Vector dev = scenarios.row(s).transpose() - mean;
                b.G.block(2 * s, 0, 1, n) = dev.transpose();
                b.G(2 * s, n + s) = -1.0;
                b.G.block(2 * s + 1, 0, 1, n) = -dev.transpose();
                b.G(2 * s + 1, n + s) = -1.0;
                b.cost[n + s] = 1.0 / static_cast<double>(t);
            }
            break;
        }
        case MeasureKind::CVaR: {
            // aux = [alpha, z_1..z_T]; z_t >= -r_t'w - alpha, z_t >= 0
            allocate(t + 1, 2 * t);
            const double tail = 1.0 / ((1.0 - measure.beta) * static_cast<double>(t));
            b.cost[n] = 1.0;
            for (Eigen::Index s = 0; s < t; ++s) {
                b.G.block(s, 0, 1, n) = -scenarios.row(s);
                b.G(s, n) = -1.0;
                b.G(s, n + 1 + s) = -1.0;
                b.G(t + s, n + 1 + s) = -1.0;
                b.cost[n + 1 + s] = tail;
            }
            break;
        }
        case MeasureKind::CDaR:
        case MeasureKind::MaxDrawdown: {
            // aux = [peak_1..peak_T, ...]; peak_t >= C_t(w), peak_t >= peak_{t-1}
            const bool cdar = measure.kind == MeasureKind::CDaR;
            const Eigen::Index aux = cdar ? 2 * t + 1 : t + 1;
            const Eigen::Index rows = cdar ? 4 * t - 1 : 3 * t - 1;
            allocate(aux, rows);
            Matrix cumulative = scenarios;
            for (Eigen::Index s = 1; s < t; ++s) cumulative.row(s) += cumulative.row(s - 1);
            Eigen::Index row = 0;
            for (Eigen::Index s = 0; s < t; ++s, ++row) {
                b.G.block(row, 0, 1, n) = cumulative.row(s);
                b.G(row, n + s) = -1.0;
            }
            for (Eigen::Index s = 1; s < t; ++s, ++row) {
                b.G(row, n + s - 1) = 1.0;
                b.G(row, n + s) = -1.0;
            }
            const Eigen::Index level = n + t;  // alpha for CDaR, the bound y for MaxDrawdown
            b.cost[level] = 1.0;
            // drawdown_t = peak_t - C_t(w)
            for (Eigen::Index s = 0; s < t; ++s, ++row) {
                b.G.block(row, 0, 1, n) = -cumulative.row(s);
                b.G(row, n + s) = 1.0;
                b.G(row, level) = -1.0;
                if (cdar) b.G(row, level + 1 + s) = -1.0;
            }
            if (cdar) {
                const double tail = 1.0 / ((1.0 - measure.beta) * static_cast<double>(t));
                for (Eigen::Index s = 0; s < t; ++s, ++row) {
                    b.G(row, level + 1 + s) = -1.0;
                    b.cost[level + 1 + s] = tail;
                }
            }
            break;
        }
        case MeasureKind::WorstRealization: {
            allocate(1, t);
            b.cost[n] = 1.0;
            for (Eigen::Index s = 0; s < t; ++s) {
                b.G.block(s, 0, 1, n) = -scenarios.row(s);
                b.G(s, n) = -1.0;
            }
            break;
        }
    }
    return b;
}

double evaluate_block(const RiskBlock& block, const Vector& weights, const SolverSettings& settings) {
    if (weights.size() != block.assets) throw Error(ErrorCode::DimensionMismatch, "weight vector length");
    double value = 0.0;
    if (block.quad.size() > 0) value += weights.dot(block.quad * weights);
    if (block.aux_count == 0) return value + block.cost.head(block.assets).dot(weights);

    // fix w, optimize over the auxiliaries only
    const auto n = block.assets;
    QpProblem p;
    p.q = block.cost.tail(block.aux_count);
    p.G = block.G.rightCols(block.aux_count);
    p.h = block.h - block.G.leftCols(n) * weights;
    const SolveResult r = solve(p, settings);
    if (!r.optimal()) {
        throw Error(ErrorCode::SolverFailure, "risk block evaluation ended with status " + std::string(to_string(r.status)));
    }
    return value + block.cost.head(n).dot(weights) + r.objective;
}

// ---------------------------------------------------------------------------
// builder

Eigen::Index QpBuilder::add_variables(Eigen::Index count, double lower, double upper) {
    const auto first = variables();
    lower_.insert(lower_.end(), static_cast<std::size_t>(count), lower);
    upper_.insert(upper_.end(), static_cast<std::size_t>(count), upper);
    cost_.insert(cost_.end(), static_cast<std::size_t>(count), 0.0);
    return first;
}

void QpBuilder::set_bounds(Eigen::Index index, double lower, double upper) {
    lower_.at(static_cast<std::size_t>(index)) = lower;
    upper_.at(static_cast<std::size_t>(index)) = upper;
}

void QpBuilder::add_cost(Eigen::Index index, double coef) { cost_.at(static_cast<std::size_t>(index)) += coef; }

void QpBuilder::add_quadratic(Eigen::Index offset, const Matrix& q) { quad_.emplace_back(offset, q); }

void QpBuilder::add_equality(Terms terms, double rhs, std::string tag) {
    rows_.push_back(Row{std::move(terms), rhs, true, std::move(tag)});
}

void QpBuilder::add_less_equal(Terms terms, double rhs, std::string tag) {
    rows_.push_back(Row{std::move(terms), rhs, false, std::move(tag)});
}

Terms QpBuilder::place(const RiskBlock& block, const std::vector<Eigen::Index>& weight_columns, const std::string& tag) {
    if (static_cast<Eigen::Index>(weight_columns.size()) != block.assets) {
        throw Error(ErrorCode::DimensionMismatch, "weight column map does not match the block");
    }
    const Eigen::Index aux = block.aux_count > 0 ? add_variables(block.aux_count) : variables();
    auto column = [&](Eigen::Index local) {
        return local < block.assets ? weight_columns[static_cast<std::size_t>(local)] : aux + local - block.assets;
    };
    for (Eigen::Index r = 0; r < block.rows(); ++r) {
        Terms terms;
        for (Eigen::Index j = 0; j < block.width(); ++j) {
            if (block.G(r, j) != 0.0) terms.emplace_back(column(j), block.G(r, j));
        }
        add_less_equal(std::move(terms), block.h[r], tag);
    }
    Terms expr;
    for (Eigen::Index j = 0; j < block.width(); ++j) {
        if (block.cost[j] != 0.0) expr.emplace_back(column(j), block.cost[j]);
    }
    return expr;
}

QpProblem QpBuilder::build() const { return build_without({}); }

QpProblem QpBuilder::build_without(const std::vector<std::string>& drop) const {
    const auto n = variables();
    QpProblem p;
    p.q = Eigen::Map<const Vector>(cost_.data(), n);
    p.lb = Eigen::Map<const Vector>(lower_.data(), n);
    p.ub = Eigen::Map<const Vector>(upper_.data(), n);
    if (!quad_.empty()) {
        p.P = Matrix::Zero(n, n);
        for (const auto& [offset, q] : quad_) {
            p.P.block(offset, offset, q.rows(), q.cols()) += q + q.transpose();
        }
    }
    auto kept = [&](const Row& r) { return std::find(drop.begin(), drop.end(), r.tag) == drop.end(); };
    Eigen::Index n_eq = 0;
    Eigen::Index n_in = 0;
    for (const auto& r : rows_) {
        if (!kept(r)) continue;
        (r.equality ? n_eq : n_in) += 1;
    }
    p.A_eq = Matrix::Zero(n_eq, n);
    p.b_eq.resize(n_eq);
    p.G = Matrix::Zero(n_in, n);
    p.h.resize(n_in);
    Eigen::Index ie = 0;
    Eigen::Index ii = 0;
    for (const auto& r : rows_) {
        if (!kept(r)) continue;
        Matrix& target = r.equality ? p.A_eq : p.G;
        Vector& rhs = r.equality ? p.b_eq : p.h;
        Eigen::Index& row = r.equality ? ie : ii;
        for (const auto& [j, v] : r.terms) target(row, j) += v;
        rhs[row] = r.rhs;
        ++row;
    }
    return p;
}

std::vector<std::string> QpBuilder::tags() const {
    std::vector<std::string> out;
    for (const auto& r : rows_) {
        if (std::find(out.begin(), out.end(), r.tag) == out.end()) out.push_back(r.tag);
    }
    return out;
}

}  // namespace quantfolio::conic
