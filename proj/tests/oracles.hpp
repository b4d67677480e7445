// Independent reference computations used by the unit tests and the
// acceptance binary. Nothing here calls into the solver or the QP module.
#ifndef NCVX_TESTS_ORACLES_HPP
#define NCVX_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "ncvx/gallery/registry.hpp"

namespace oracle {

using ncvx::Matrix;
using ncvx::Vector;

inline constexpr double inf = std::numeric_limits<double>::infinity();

/// Central differences of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6)
{
    Vector g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

// ---------------------------------------------------------------------------
// QP

/// min 0.5 x'Px + q'x over lo <= x <= hi by enumerating which bound, if
/// any, each coordinate sits on. P must be positive definite.
inline Vector box_qp_enumerate(const Matrix& P, const Vector& q, const Vector& lo, const Vector& hi)
{
    const Eigen::Index n = q.size();
    int combos = 1;
    for (Eigen::Index i = 0; i < n; ++i) combos *= 3;
    Vector best;
    double best_val = inf;
    for (int c = 0; c < combos; ++c) {
        Vector x = Vector::Zero(n);
        std::vector<Eigen::Index> free;
        int code = c;
        bool skip = false;
        for (Eigen::Index i = 0; i < n; ++i, code /= 3) {
            const int s = code % 3;
            if (s == 0) free.push_back(i);
            else {
                const double b = s == 1 ? lo[i] : hi[i];
                if (!std::isfinite(b)) skip = true;
                x[i] = b;
            }
        }
        if (skip) continue;
        if (!free.empty()) {
            const auto m = static_cast<Eigen::Index>(free.size());
            Matrix Pf(m, m);
            Vector rhs(m);
            for (Eigen::Index a = 0; a < m; ++a) {
                rhs[a] = -q[free[a]];
                for (Eigen::Index i = 0; i < n; ++i)
                    if (std::find(free.begin(), free.end(), i) == free.end()) rhs[a] -= P(free[a], i) * x[i];
                for (Eigen::Index b = 0; b < m; ++b) Pf(a, b) = P(free[a], free[b]);
            }
            const Vector xf = Pf.ldlt().solve(rhs);
            for (Eigen::Index a = 0; a < m; ++a) x[free[a]] = xf[a];
        }
        bool feasible = true;
        for (Eigen::Index i = 0; i < n; ++i)
            if (x[i] < lo[i] - 1e-12 || x[i] > hi[i] + 1e-12) feasible = false;
        if (!feasible) continue;
        const double val = 0.5 * x.dot(P * x) + q.dot(x);
        if (val < best_val) {
            best_val = val;
            best = x;
        }
    }
    return best;
}

/// Smallest |G lam| over a grid on the simplex with spacing `step`
/// (two or three columns).
inline double hull_grid(const Matrix& G, double step = 1e-3)
{
    // Coarse pass over the simplex, then a finer pass around the best cell.
    auto value = [&](double a, double b) {
        if (a < 0 || b < 0 || a + b > 1) return inf;
        const double c = 1.0 - a - b;
        return G.cols() == 2 ? (a * G.col(0) + (1.0 - a) * G.col(1)).norm()
                             : (a * G.col(0) + b * G.col(1) + c * G.col(2)).norm();
    };
    const int steps = static_cast<int>(std::lround(1.0 / step));
    const int jmax = G.cols() == 2 ? 0 : steps;
    double best = inf, ba = 0, bb = 0;
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= jmax && i + j <= steps; ++j) {
            const double v = value(i * step, j * step);
            if (v < best) best = v, ba = i * step, bb = j * step;
        }
    const double fine = step / 100.0;
    const int jfine = G.cols() == 2 ? 0 : 100;
    const double a0 = ba, b0 = bb;
    for (int i = -100; i <= 100; ++i)
        for (int j = -jfine; j <= jfine; ++j) best = std::min(best, value(a0 + i * fine, b0 + j * fine));
    return best;
}

// ---------------------------------------------------------------------------
// Textbook BFGS on a smooth function: d = -H g, weak Wolfe by doubling then
// bisection from t = 1, expanded inverse update.

struct BfgsTrace
{
    std::vector<Vector> iterates;
};

inline BfgsTrace textbook_bfgs(const std::function<double(const Vector&)>& f,
                               const std::function<Vector(const Vector&)>& grad, Vector x, int iters,
                               double c1 = 1e-4, double c2 = 0.5)
{
    const Eigen::Index n = x.size();
    Matrix H = Matrix::Identity(n, n);
    BfgsTrace out;
    out.iterates.push_back(x);
    Vector g = grad(x);
    double fx = f(x);
    for (int k = 0; k < iters; ++k) {
        const Vector d = -H * g;
        const double slope = g.dot(d);
        double lo = 0.0, hi = inf, t = 1.0;
        Vector xn, gn;
        double fn = 0.0;
        for (int guard = 0; guard < 200; ++guard) {
            xn = x + t * d;
            fn = f(xn);
            gn = grad(xn);
            if (!(fn <= fx + c1 * t * slope)) hi = t;
            else if (gn.dot(d) >= c2 * slope) break;
            else lo = t;
            t = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * t;
        }
        const Vector s = xn - x;
        const Vector y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-10 * s.norm() * y.norm()) {
            const double r = 1.0 / sy;
            const Matrix I = Matrix::Identity(n, n);
            H = (I - r * s * y.transpose()) * H * (I - r * y * s.transpose()) + r * s * s.transpose();
        }
        x = xn;
        g = gn;
        fx = fn;
        out.iterates.push_back(x);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gallery

/// max_j |q'a_j| for unit-normalised q.
inline double odl_recovery(const Vector& q, const Matrix& A)
{
    return (A.transpose() * (q / q.norm())).cwiseAbs().maxCoeff();
}

/// Closed-form orthogonal Procrustes objective min_{W'W=I} |WA - B|_F^2.
inline double procrustes_optimum(const Matrix& A, const Matrix& B)
{
    Eigen::JacobiSVD<Matrix> svd(B * A.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Matrix W = svd.matrixU() * svd.matrixV().transpose();
    return (W * A - B).squaredNorm();
}

/// Compliance of the 2-spring chain by scalar formulas: with k1 joining the
/// support and node 0, k2 joining nodes 0 and 1, loads f0 and f1.
inline double chain2_compliance(double x1, double x2, double kmin, double kmax, double f0, double f1)
{
    const double k1 = kmin + x1 * (kmax - kmin);
    const double k2 = kmin + x2 * (kmax - kmin);
    // Spring 2 carries f1, spring 1 carries f0 + f1.
    const double u0 = (f0 + f1) / k1;
    const double u1 = u0 + f1 / k2;
    return f0 * u0 + f1 * u1;
}

/// Exhaustive grid over 2-element designs with x1 + x2 <= 2 v0, each
/// compliance from the exact two-spring solve.
inline double chain2_grid_optimum(double v0, double kmin, double kmax, double f0, double f1, double step = 1e-2)
{
    double best = inf;
    const auto steps = static_cast<int>(std::lround(1.0 / step));
    for (int i = 0; i <= steps; ++i)
        for (int j = 0; j <= steps; ++j) {
            const double x1 = i * step, x2 = j * step;
            if (x1 + x2 > 2.0 * v0 + 1e-12) continue;
            best = std::min(best, chain2_compliance(x1, x2, kmin, kmax, f0, f1));
        }
    return best;
}

// ---------------------------------------------------------------------------
// Scalar-loop objective evaluations, written without Eigen products or tapes.

inline double loop_odl(const Matrix& Y, const Vector& q)
{
    double total = 0.0;
    for (Eigen::Index j = 0; j < Y.cols(); ++j) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < Y.rows(); ++i) s += q[i] * Y(i, j);
        total += std::fabs(s);
    }
    return total / static_cast<double>(Y.cols());
}

inline std::vector<double> loop_logits(const ncvx::gallery::AttackNetwork& net, const Vector& x)
{
    std::vector<double> h(static_cast<std::size_t>(net.W1.rows()));
    for (Eigen::Index i = 0; i < net.W1.rows(); ++i) {
        double s = net.b1[i];
        for (Eigen::Index j = 0; j < net.W1.cols(); ++j) s += net.W1(i, j) * x[j];
        h[static_cast<std::size_t>(i)] = s > 0.0 ? s : 0.0;
    }
    std::vector<double> out(static_cast<std::size_t>(net.W2.rows()));
    for (Eigen::Index k = 0; k < net.W2.rows(); ++k) {
        double s = net.b2[k];
        for (Eigen::Index i = 0; i < net.W2.cols(); ++i) s += net.W2(k, i) * h[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(k)] = s;
    }
    return out;
}

/// max_{i != y} logit_i - logit_y
inline double loop_margin(const ncvx::gallery::AttackNetwork& net, const Vector& x, Eigen::Index y)
{
    const auto l = loop_logits(net, x);
    double other = -inf;
    for (std::size_t i = 0; i < l.size(); ++i)
        if (static_cast<Eigen::Index>(i) != y) other = std::max(other, l[i]);
    return other - l[static_cast<std::size_t>(y)];
}

inline double loop_distance(const ncvx::gallery::AttackInstance& a, ncvx::gallery::AttackMetric metric, const Vector& x)
{
    double s = 0.0;
    if (metric == ncvx::gallery::AttackMetric::L2) {
        for (Eigen::Index i = 0; i < x.size(); ++i) s += (x[i] - a.clean[i]) * (x[i] - a.clean[i]);
        return std::sqrt(s);
    }
    for (Eigen::Index k = 0; k < a.net.E.rows(); ++k) {
        double e1 = a.net.e[k], e0 = a.net.e[k];
        for (Eigen::Index j = 0; j < x.size(); ++j) {
            e1 += a.net.E(k, j) * x[j];
            e0 += a.net.E(k, j) * a.clean[j];
        }
        const double diff = (e1 > 0 ? e1 : 0.0) - (e0 > 0 ? e0 : 0.0);
        s += diff * diff;
    }
    return std::sqrt(s);
}

/// Strain energy sum_i k_i (u_i - u_{i-1})^2 with u_{-1} = 0.
inline double loop_chain_energy(const Vector& x, const Vector& u, double kmin, double kmax)
{
    double e = 0.0, prev = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double k = kmin + x[i] * (kmax - kmin);
        e += k * (u[i] - prev) * (u[i] - prev);
        prev = u[i];
    }
    return e;
}

inline double loop_procrustes(const Matrix& W, const Matrix& A, const Matrix& B)
{
    double total = 0.0;
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            double s = -B(i, j);
            for (Eigen::Index k = 0; k < W.cols(); ++k) s += W(i, k) * A(k, j);
            total += s * s;
        }
    return total;
}

// ---------------------------------------------------------------------------
// Attack random-search baselines

/// Best margin over random feasible points: perturbations drawn in the
/// epsilon ball (rejection for the embedding metric), clipped to the box.
inline double attack_max_loss_baseline(const ncvx::gallery::AttackInstance& a, ncvx::gallery::AttackMetric metric,
                                       double eps, int samples, std::uint64_t seed)
{
    ncvx::Rng rng(seed);
    const Eigen::Index d = a.clean.size();
    double best = loop_margin(a.net, a.clean, a.label);
    int drawn = 0;
    while (drawn < samples) {
        Vector dir(d);
        for (Eigen::Index i = 0; i < d; ++i) dir[i] = rng.normal();
        const double r = eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        const double scale = metric == ncvx::gallery::AttackMetric::L2 ? r : 3.0 * r;
        Vector x = a.clean + scale * dir / dir.norm();
        for (Eigen::Index i = 0; i < d; ++i) x[i] = std::clamp(x[i], 0.0, 1.0);
        ++drawn;
        if (loop_distance(a, metric, x) > eps) continue;
        best = std::max(best, loop_margin(a.net, x, a.label));
    }
    return best;
}

/// Smallest distance to the clean input among random misclassified points.
inline double attack_min_distortion_baseline(const ncvx::gallery::AttackInstance& a, ncvx::gallery::AttackMetric metric,
                                             int samples, std::uint64_t seed)
{
    ncvx::Rng rng(seed);
    const Eigen::Index d = a.clean.size();
    double best = inf;
    for (int s = 0; s < samples; ++s) {
        Vector x(d);
        if (s % 2 == 0) {
            for (Eigen::Index i = 0; i < d; ++i) x[i] = rng.uniform();
        } else {
            Vector dir(d);
            for (Eigen::Index i = 0; i < d; ++i) dir[i] = rng.normal();
            x = a.clean + rng.uniform(0.0, 1.5) * dir / dir.norm();
            for (Eigen::Index i = 0; i < d; ++i) x[i] = std::clamp(x[i], 0.0, 1.0);
        }
        if (loop_margin(a.net, x, a.label) >= 0.0) best = std::min(best, loop_distance(a, metric, x));
    }
    return best;
}

} // namespace oracle

#endif // NCVX_TESTS_ORACLES_HPP
