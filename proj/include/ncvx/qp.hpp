#ifndef NCVX_QP_HPP
#define NCVX_QP_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>

#include <Eigen/Dense>

#include "ncvx/errors.hpp"
#include "ncvx/problem.hpp"

namespace ncvx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Convex QP: minimize 0.5 x'Px + q'x subject to l <= Ax <= u.
struct QPData
{
    Matrix P;
    Vector q;
    Matrix A;
    Vector l;
    Vector u;
};

enum class QPStatus { Solved, MaxIter, PrimalInfeasible, DualInfeasible };

inline std::string_view to_string(QPStatus s)
{
    switch (s) {
    case QPStatus::Solved: return "solved";
    case QPStatus::MaxIter: return "max_iter";
    case QPStatus::PrimalInfeasible: return "primal_infeasible";
    case QPStatus::DualInfeasible: return "dual_infeasible";
    }
    return "?";
}

struct QPSolution
{
    Vector x;
    Vector y;
    QPStatus status = QPStatus::MaxIter;
    double prim_res = kInf;  // ||Ax - proj(Ax + y)||_inf
    double dual_res = kInf;  // ||Px + q + A'y||_inf
    int iterations = 0;
    bool polished = false;
};

struct QPSettings
{
    double tol = 1e-9;
    int max_iter = 20000;
    double sigma = 1e-6;
    double rho = 0.1;
    double alpha = 1.6;
    int adapt_interval = 25;
    double eq_rho_scale = 1e3;
    double infeasibility_tol = 1e-9;
    bool polish = true;
};

namespace qp_detail {

inline Vector project(const Vector& v, const Vector& l, const Vector& u) { return v.cwiseMax(l).cwiseMin(u); }

inline double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

inline void validate(const QPData& d)
{
    const auto n = d.P.rows();
    if (d.P.cols() != n || d.q.size() != n)
        throw ContractError("solve_qp: P must be n x n and q length n");
    if (d.A.cols() != n && d.A.rows() > 0) throw ContractError("solve_qp: A must have n columns");
    if (d.l.size() != d.A.rows() || d.u.size() != d.A.rows())
        throw ContractError("solve_qp: bounds must have one entry per row of A");
    const double scale = std::max(1.0, n ? d.P.cwiseAbs().maxCoeff() : 0.0);
    if (n && (d.P - d.P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ContractError("solve_qp: P is not symmetric");
    for (Eigen::Index i = 0; i < d.l.size(); ++i)
        if (!(d.l[i] <= d.u[i])) throw ContractError("solve_qp: l > u in row " + std::to_string(i));
}

/// KKT residuals of a candidate pair.
inline void residuals(const QPData& d, QPSolution& s)
{
    const Vector Ax = d.A * s.x;
    s.prim_res = inf_norm(Ax - project(Ax + s.y, d.l, d.u));
    s.dual_res = inf_norm(d.P * s.x + d.q + d.A.transpose() * s.y);
}

/// Residuals must be below tol, and below tol times the problem's own scale
/// when that scale is under one, so tiny-data QPs are not declared solved at
/// the starting point.
inline bool within_tol(const QPData& d, const QPSolution& s, double tol)
{
    const Vector Ax = d.A * s.x;
    const double sp = std::max(inf_norm(Ax), inf_norm(project(Ax + s.y, d.l, d.u)));
    const double sd = std::max({inf_norm(d.P * s.x), inf_norm(d.A.transpose() * s.y), inf_norm(d.q)});
    auto eff = [tol](double scale) { return tol * std::clamp(scale, 1e-6, 1.0); };
    return s.prim_res <= eff(sp) && s.dual_res <= eff(sd);
}

/// Solves the equality-constrained QP on a guessed active set, with
/// regularization removed by iterative refinement.
inline QPSolution polish(const QPData& d, const Vector& x, const Vector& z, const Vector& y)
{
    const Eigen::Index n = d.P.rows();
    const Eigen::Index m = d.A.rows();
    std::vector<Eigen::Index> rows;
    Vector bound(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (z[i] - d.l[i] < -y[i]) {
            rows.push_back(i);
            bound[i] = d.l[i];
        } else if (d.u[i] - z[i] < y[i]) {
            rows.push_back(i);
            bound[i] = d.u[i];
        }
    }
    const auto k = static_cast<Eigen::Index>(rows.size());
    Matrix K = Matrix::Zero(n + k, n + k);
    Vector rhs(n + k);
    K.topLeftCorner(n, n) = d.P;
    rhs.head(n) = -d.q;
    for (Eigen::Index r = 0; r < k; ++r) {
        K.block(n + r, 0, 1, n) = d.A.row(rows[r]);
        K.block(0, n + r, n, 1) = d.A.row(rows[r]).transpose();
        rhs[n + r] = bound[rows[r]];
    }
    constexpr double delta = 1e-11;
    Matrix Kreg = K;
    Kreg.topLeftCorner(n, n).diagonal().array() += delta;
    Kreg.bottomRightCorner(k, k).diagonal().array() -= delta;
    Eigen::PartialPivLU<Matrix> lu(Kreg);
    Vector sol = lu.solve(rhs);
    for (int it = 0; it < 8 && sol.allFinite(); ++it) sol += lu.solve(rhs - K * sol);

    QPSolution out;
    out.x = sol.head(n);
    out.y = Vector::Zero(m);
    for (Eigen::Index r = 0; r < k; ++r) out.y[rows[r]] = sol[n + r];
    out.polished = true;
    if (!out.x.allFinite() || !out.y.allFinite()) return out;
    residuals(d, out);
    return out;
}

inline bool primal_infeasible(const QPData& d, const Vector& dy, double eps)
{
    const double ny = inf_norm(dy);
    if (ny < 1e-12) return false;
    if (inf_norm(d.A.transpose() * dy) > eps * ny) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < dy.size(); ++i) {
        if (dy[i] > 0.0) {
            if (std::isinf(d.u[i])) return false;
            support += d.u[i] * dy[i];
        } else if (dy[i] < 0.0) {
            if (std::isinf(d.l[i])) return false;
            support += d.l[i] * dy[i];
        }
    }
    return support < -eps * ny;
}

inline bool dual_infeasible(const QPData& d, const Vector& dx, double eps)
{
    const double nx = inf_norm(dx);
    if (nx < 1e-12) return false;
    if (inf_norm(d.P * dx) > eps * nx) return false;
    if (d.q.dot(dx) > -eps * nx) return false;
    const Vector Adx = d.A * dx;
    for (Eigen::Index i = 0; i < Adx.size(); ++i) {
        if (std::isfinite(d.u[i]) && Adx[i] > eps * nx) return false;
        if (std::isfinite(d.l[i]) && Adx[i] < -eps * nx) return false;
    }
    return true;
}

} // namespace qp_detail

/// Operator-splitting ADMM for convex QPs with active-set polishing.
///
/// Each iteration solves (P + sigma I + A'RA) x = rhs with a cached Cholesky
/// factor; R holds per-row penalties (equality rows get eq_rho_scale times
/// the base value). The base penalty adapts every adapt_interval iterations
/// from the ratio of normalized primal and dual residuals.
namespace qp_detail {

inline QPSolution admm(const QPData& d, const QPSettings& opt)
{

    const Eigen::Index n = d.P.rows();
    const Eigen::Index m = d.A.rows();

    auto row_rho = [&](double rho) {
        Vector r(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::isinf(d.l[i]) && std::isinf(d.u[i])) r[i] = 1e-6;
            else if (d.l[i] == d.u[i]) r[i] = rho * opt.eq_rho_scale;
            else r[i] = rho;
        }
        return r;
    };

    double rho = opt.rho;
    Vector R = row_rho(rho);
    Eigen::LDLT<Matrix> factor;
    auto refactor = [&] {
        Matrix M = d.P + d.A.transpose() * R.asDiagonal() * d.A;
        M.diagonal().array() += opt.sigma;
        factor.compute(M);
    };
    refactor();

    Vector x = Vector::Zero(n), z = Vector::Zero(m), y = Vector::Zero(m);
    z = project(z, d.l, d.u);
    QPSolution best;
    best.x = x;
    best.y = y;
    residuals(d, best);

    for (int k = 1; k <= opt.max_iter; ++k) {
        const Vector x_prev = x;
        const Vector y_prev = y;
        const Vector rhs = opt.sigma * x - d.q + d.A.transpose() * (R.cwiseProduct(z) - y);
        const Vector xt = factor.solve(rhs);
        const Vector zt = d.A * xt;
        x = opt.alpha * xt + (1.0 - opt.alpha) * x;
        const Vector zr = opt.alpha * zt + (1.0 - opt.alpha) * z;
        const Vector z_new = project(zr + y.cwiseQuotient(R), d.l, d.u);
        y += R.cwiseProduct(zr - z_new);
        z = z_new;

        const bool check = k <= 10 || k % 5 == 0 || k == opt.max_iter;
        if (!check) continue;

        QPSolution cur;
        cur.x = x;
        cur.y = y;
        cur.iterations = k;
        residuals(d, cur);
        if (std::max(cur.prim_res, cur.dual_res) < std::max(best.prim_res, best.dual_res)) best = cur;
        if (within_tol(d, cur, opt.tol)) {
            cur.status = QPStatus::Solved;
            return cur;
        }

        if (opt.polish && (k % opt.adapt_interval == 0 || k <= 10)) {
            QPSolution p = polish(d, x, z, y);
            p.iterations = k;
            if (within_tol(d, p, opt.tol)) {
                p.status = QPStatus::Solved;
                return p;
            }
        }

        if (primal_infeasible(d, y - y_prev, opt.infeasibility_tol)) {
            best.status = QPStatus::PrimalInfeasible;
            best.iterations = k;
            return best;
        }
        if (dual_infeasible(d, x - x_prev, opt.infeasibility_tol)) {
            best.status = QPStatus::DualInfeasible;
            best.iterations = k;
            return best;
        }

        if (k % opt.adapt_interval == 0 && m > 0) {
            const Vector Ax = d.A * x;
            const double rp = inf_norm(Ax - z) / std::max({inf_norm(Ax), inf_norm(z), 1e-30});
            const double rd = inf_norm(d.P * x + d.q + d.A.transpose() * y) /
                              std::max({inf_norm(d.P * x), inf_norm(d.A.transpose() * y), inf_norm(d.q), 1e-30});
            const double ratio = std::sqrt(rp / std::max(rd, 1e-30));
            const double rho_new = std::clamp(rho * ratio, 1e-6, 1e6);
            if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
                rho = rho_new;
                R = row_rho(rho);
                refactor();
            }
        }
    }
    best.status = QPStatus::MaxIter;
    if (best.iterations == 0) best.iterations = opt.max_iter;
    return best;
}

// Ruiz equilibration of the KKT matrix followed by cost scaling.
struct Scaling
{
    Vector D, E;
    double c = 1.0;
};

inline Scaling equilibrate(QPData& d, int passes = 15)
{
    const Eigen::Index n = d.P.rows(), m = d.A.rows();
    Scaling s{Vector::Ones(n), Vector::Ones(m), 1.0};
    auto safe = [](double v) { return v < 1e-4 ? 1.0 : std::clamp(1.0 / std::sqrt(v), 1e-4, 1e4); };
    for (int pass = 0; pass < passes; ++pass) {
        Vector dD(n), dE(m);
        for (Eigen::Index j = 0; j < n; ++j) {
            double v = d.P.col(j).cwiseAbs().maxCoeff();
            if (m > 0) v = std::max(v, d.A.col(j).cwiseAbs().maxCoeff());
            dD[j] = safe(v);
        }
        for (Eigen::Index i = 0; i < m; ++i) dE[i] = n > 0 ? safe(d.A.row(i).cwiseAbs().maxCoeff()) : 1.0;
        d.P = dD.asDiagonal() * d.P * dD.asDiagonal();
        d.q = dD.cwiseProduct(d.q);
        d.A = dE.asDiagonal() * d.A * dD.asDiagonal();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (std::isfinite(d.l[i])) d.l[i] *= dE[i];
            if (std::isfinite(d.u[i])) d.u[i] *= dE[i];
        }
        s.D = s.D.cwiseProduct(dD);
        s.E = s.E.cwiseProduct(dE);
    }
    if (n > 0) {
        double pm = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) pm += d.P.col(j).cwiseAbs().maxCoeff();
        pm /= static_cast<double>(n);
        const double v = std::max(pm, inf_norm(d.q));
        s.c = safe(v);
        d.P *= s.c;
        d.q *= s.c;
    }
    return s;
}

} // namespace qp_detail

inline QPSolution solve_qp(const QPData& d, const QPSettings& opt)
{
    using namespace qp_detail;
    validate(d);
    if (!(opt.tol > 0.0)) throw ContractError("solve_qp: tol must be positive");
    QPData sd = d;
    const Scaling s = equilibrate(sd);
    QPSolution sol = admm(sd, opt);
    sol.x = s.D.cwiseProduct(sol.x);
    sol.y = s.E.cwiseProduct(sol.y) / s.c;
    residuals(d, sol);
    return sol;
}

inline QPSolution solve_qp(const QPData& d, double tol = 1e-9, int max_iter = 20000)
{
    QPSettings s;
    s.tol = tol;
    s.max_iter = max_iter;
    return solve_qp(d, s);
}

/// Seam for alternative QP engines; only the built-in ADMM engine ships.
class QPBackend
{
public:
    virtual ~QPBackend() = default;
    virtual QPSolution solve(const QPData& d, const QPSettings& s) const = 0;
};

class AdmmBackend final : public QPBackend
{
public:
    QPSolution solve(const QPData& d, const QPSettings& s) const override { return solve_qp(d, s); }
};

// ---------------------------------------------------------------------------

struct HullResult
{
    double measure = kInf;
    Vector lambda;
    QPStatus status = QPStatus::MaxIter;
};

/// Minimum-norm element of the convex hull of the columns of G.
///
/// lambda is always returned on the simplex, so measure = ||G lambda|| is an
/// upper bound on the true minimum even when the QP stops early.
inline HullResult min_norm_in_hull(const Matrix& G, double tol = 1e-9, int max_iter = 20000)
{
    const Eigen::Index k = G.cols();
    if (k < 1) throw ContractError("min_norm_in_hull: need at least one column");
    HullResult r;
    if (k == 1) {
        r.lambda = Vector::Ones(1);
        r.measure = G.col(0).norm();
        r.status = QPStatus::Solved;
        return r;
    }
    QPData d;
    d.P = G.transpose() * G;
    d.P = 0.5 * (d.P + d.P.transpose()).eval();
    d.q = Vector::Zero(k);
    d.A = Matrix::Zero(k + 1, k);
    d.A.topRows(k).setIdentity();
    d.A.row(k).setOnes();
    d.l = Vector::Zero(k + 1);
    d.u = Vector::Constant(k + 1, kInf);
    d.l[k] = 1.0;
    d.u[k] = 1.0;
    const QPSolution s = solve_qp(d, tol, max_iter);

    Vector lam = s.x.cwiseMax(0.0);
    const double total = lam.sum();
    if (!(total > 0.0) || !lam.allFinite()) lam = Vector::Constant(k, 1.0 / static_cast<double>(k));
    else lam /= total;
    r.lambda = lam;
    r.measure = (G * lam).norm();
    r.status = s.status;
    // Every vertex is feasible, so keep the best one if the solve came up short.
    Eigen::Index best = 0;
    const double vmin = G.colwise().norm().minCoeff(&best);
    if (vmin < r.measure) {
        r.measure = vmin;
        r.lambda = Vector::Unit(k, best);
    }
    return r;
}

/// min |G lam + K t| over lam in the simplex and lo <= t <= hi. The extra
/// generators K describe kinks of the penalty at the current point.
inline HullResult min_norm_in_hull(const Matrix& G, const Matrix& K, const Vector& lo, const Vector& hi,
                                   double tol = 1e-9, int max_iter = 20000)
{
    const Eigen::Index k = G.cols();
    const Eigen::Index a = K.cols();
    if (k < 1) throw ContractError("min_norm_in_hull: need at least one column");
    if (K.rows() != G.rows() || lo.size() != a || hi.size() != a)
        throw ShapeError("min_norm_in_hull: generator shapes disagree");
    if (a == 0) return min_norm_in_hull(G, tol, max_iter);
    Matrix M(G.rows(), k + a);
    M << G, K;
    QPData d;
    d.P = M.transpose() * M;
    d.P = 0.5 * (d.P + d.P.transpose()).eval();
    d.q = Vector::Zero(k + a);
    d.A = Matrix::Zero(k + a + 1, k + a);
    d.A.topRows(k + a).setIdentity();
    d.A.row(k + a).head(k).setOnes();
    d.l = Vector::Zero(k + a + 1);
    d.u = Vector::Constant(k + a + 1, kInf);
    d.l.segment(k, a) = lo;
    d.u.segment(k, a) = hi;
    d.l[k + a] = 1.0;
    d.u[k + a] = 1.0;
    const QPSolution s = solve_qp(d, tol, max_iter);

    Vector lam = s.x.head(k).cwiseMax(0.0);
    const double total = lam.sum();
    if (!(total > 0.0) || !lam.allFinite()) lam = Vector::Constant(k, 1.0 / static_cast<double>(k));
    else lam /= total;
    Vector t = s.x.tail(a).cwiseMax(lo).cwiseMin(hi);
    if (!t.allFinite()) t = Vector::Zero(a).cwiseMax(lo).cwiseMin(hi);
    HullResult r;
    r.lambda = lam;
    r.measure = (G * lam + K * t).norm();
    r.status = s.status;
    Eigen::Index best = 0;
    const double vmin = G.colwise().norm().minCoeff(&best);
    if (vmin < r.measure) {
        r.measure = vmin;
        r.lambda = Vector::Unit(k, best);
    }
    return r;
}

// ---------------------------------------------------------------------------

struct SteeringResult
{
    Vector d;
    Vector multipliers;  // inequality entries in [0, 1], then equality entries in [-1, 1]
    double predicted_violation_reduction = 0.0;
    QPStatus status = QPStatus::Solved;
};

/// Total violation sum(max(c_i, 0)) + sum(|c_e|).
inline double total_violation(const Vector& ci, const Vector& ce)
{
    return ci.cwiseMax(0.0).sum() + ce.cwiseAbs().sum();
}

/// Penalty-steering direction for inverse-Hessian approximation H.
///
/// The direction minimizes the piecewise-quadratic model
///     mu g'd + 0.5 d'H^{-1}d + sum max(ci + Ji d, 0) + sum |ce + Je d|
/// through its dual, a box-constrained QP in the multipliers
///     min 0.5 lam'(J H J')lam + (mu J H g - c)'lam,  0 <= lam_i <= 1, -1 <= lam_e <= 1
/// after which d = -H (mu g + J'lam). H is used directly, never inverted.
inline SteeringResult steering_direction(const Matrix& H, const Vector& grad_f, const Vector& ci, const Matrix& ci_jac,
                                         const Vector& ce, const Matrix& ce_jac, double mu,
                                         const QPSettings& settings = {})
{
    if (!(mu >= 0.0)) throw ContractError("steering_direction: mu must be non-negative");
    const Eigen::Index n = grad_f.size();
    const Eigen::Index p = ci.size();
    const Eigen::Index q = ce.size();
    const Eigen::Index m = p + q;

    SteeringResult out;
    if (m == 0) {
        out.d = -mu * (H * grad_f);
        return out;
    }

    Matrix J(m, n);
    if (p) J.topRows(p) = ci_jac;
    if (q) J.bottomRows(q) = ce_jac;
    Vector c(m);
    if (p) c.head(p) = ci;
    if (q) c.tail(q) = ce;

    const Matrix HJt = H * J.transpose();
    const Vector Hg = H * grad_f;
    QPData d;
    d.P = J * HJt;
    d.P = 0.5 * (d.P + d.P.transpose()).eval();
    d.q = mu * (J * Hg) - c;
    d.A = Matrix::Identity(m, m);
    d.l = Vector::Zero(m);
    d.u = Vector::Ones(m);
    if (q) d.l.tail(q).setConstant(-1.0);

    const QPSolution s = solve_qp(d, settings);
    out.status = s.status;
    const Vector lam = s.x.cwiseMax(d.l).cwiseMin(d.u);
    out.d = -(mu * Hg + HJt * lam);
    out.multipliers = lam;
    const Vector ci_lin = p ? Vector(ci + ci_jac * out.d) : Vector();
    const Vector ce_lin = q ? Vector(ce + ce_jac * out.d) : Vector();
    out.predicted_violation_reduction = total_violation(ci, ce) - total_violation(ci_lin, ce_lin);
    return out;
}

} // namespace ncvx

#endif // NCVX_QP_HPP
