#ifndef NCVX_SOLVER_HPP
#define NCVX_SOLVER_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ncvx/errors.hpp"
#include "ncvx/problem.hpp"
#include "ncvx/qp.hpp"
#include "ncvx/random.hpp"

namespace ncvx {

enum class Termination { Converged, MaxIter, LineSearchFailed, StationaryInfeasible, NumericalError };

inline std::string_view to_string(Termination t)
{
    switch (t) {
    case Termination::Converged: return "Converged";
    case Termination::MaxIter: return "MaxIter";
    case Termination::LineSearchFailed: return "LineSearchFailed";
    case Termination::StationaryInfeasible: return "StationaryInfeasible";
    case Termination::NumericalError: return "NumericalError";
    }
    return "?";
}

class InverseHessianApprox;

/// One row of the iterate log.
struct IterationRecord
{
    int iter = 0;
    double mu = 0.0;
    double phi = 0.0;
    double f = 0.0;
    double viol_ineq = 0.0;
    double viol_eq = 0.0;
    double stationarity = 0.0;
    double step = 0.0;
    QPStatus qp_status = QPStatus::Solved;
};

/// Source of the BFGS gradient difference y. Penalty uses the penalty
/// subgradients; Lagrangian weights the constraint gradients by the steering
/// QP multipliers of the step, which avoids sign flips at constraint kinks.
enum class CurvaturePairs
{
    Penalty,
    Lagrangian
};

inline std::string_view to_string(CurvaturePairs c) { return c == CurvaturePairs::Penalty ? "penalty" : "lagrangian"; }

struct SolverOptions
{
    double opt_tol = 1e-8;
    double viol_ineq_tol = 1e-8;
    double viol_eq_tol = 1e-8;
    int max_iter = 1000;
    double mu0 = 1.0;
    double steering_c_v = 0.1;
    double steering_c_mu = 0.5;
    int steering_max_trials = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.5;
    int linesearch_max_bisections = 50;
    /// 0 selects min(50, n + 10).
    int gradient_cache_size = 0;
    /// Only cached gradients evaluated within this distance of the current
    /// iterate enter the stationarity hull.
    double stationarity_radius = 1e-4;
    /// 0 = dense BFGS; > 0 = L-BFGS keeping that many pairs.
    int limited_memory_pairs = 0;
    CurvaturePairs curvature = CurvaturePairs::Penalty;
    std::uint64_t seed = 0;
    std::optional<Vector> x0;
    QPSettings qp;
    /// Called after every iteration with the logged record and the current
    /// inverse-Hessian approximation.
    std::function<void(const IterationRecord&, const InverseHessianApprox&)> observer;

    void validate() const
    {
        auto require = [](bool ok, const char* what) {
            if (!ok) throw ContractError(std::string("SolverOptions: ") + what);
        };
        require(opt_tol > 0.0, "opt_tol must be positive");
        require(viol_ineq_tol > 0.0, "viol_ineq_tol must be positive");
        require(viol_eq_tol > 0.0, "viol_eq_tol must be positive");
        require(max_iter >= 0, "max_iter must be non-negative");
        require(mu0 > 0.0, "mu0 must be positive");
        require(steering_c_v > 0.0 && steering_c_v < 1.0, "steering_c_v must lie in (0,1)");
        require(steering_c_mu > 0.0 && steering_c_mu < 1.0, "steering_c_mu must lie in (0,1)");
        require(steering_max_trials >= 0, "steering_max_trials must be non-negative");
        require(wolfe_c1 > 0.0 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0, "need 0 < wolfe_c1 < wolfe_c2 < 1");
        require(linesearch_max_bisections > 0, "linesearch_max_bisections must be positive");
        require(gradient_cache_size >= 0, "gradient_cache_size must be non-negative");
        require(stationarity_radius > 0.0, "stationarity_radius must be positive");
        require(limited_memory_pairs >= 0, "limited_memory_pairs must be non-negative");
    }
};

// ---------------------------------------------------------------------------
// Quasi-Newton

/// True when the curvature pair is too weak to update with.
inline bool bfgs_skip(const Vector& s, const Vector& y)
{
    return !(s.dot(y) > 1e-10 * s.norm() * y.norm()) || !s.allFinite() || !y.allFinite();
}

/// Inverse BFGS update H+ = (I - r s y')H(I - r y s') + r s s', r = 1/s'y.
/// Returns H unchanged when s'y <= 1e-10 |s||y|.
inline Matrix bfgs_update(const Matrix& H, const Vector& s, const Vector& y)
{
    if (bfgs_skip(s, y)) return H;
    const double rho = 1.0 / s.dot(y);
    // Product form; keeps definiteness better than the expanded one when H is badly scaled.
    const Matrix HV = H - rho * (H * y) * s.transpose();
    Matrix out = HV - rho * s * (y.transpose() * HV) + rho * (s * s.transpose());
    return 0.5 * (out + out.transpose());
}

/// Dense inverse Hessian or a limited-memory ring of (s, y) pairs.
class InverseHessianApprox
{
public:
    InverseHessianApprox(Eigen::Index n, int pairs) : n_(n), pairs_(pairs) { reset(); }

    void reset()
    {
        if (pairs_ == 0) H_ = Matrix::Identity(n_, n_);
        s_.clear();
        y_.clear();
    }

    /// Returns false when the pair was skipped.
    bool update(const Vector& s, const Vector& y)
    {
        if (bfgs_skip(s, y)) return false;
        if (pairs_ == 0) {
            Matrix next = bfgs_update(H_, s, y);
            // Rounding can cost definiteness once H is very ill-conditioned; start over then.
            bool spd = next.allFinite();
            if (spd) {
                // Cholesky can succeed on a barely indefinite matrix of large norm, so look at the spectrum.
                const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(next, Eigen::EigenvaluesOnly).eigenvalues();
                spd = ev.minCoeff() > 1e-15 * ev.maxCoeff();
            }
            if (!spd) {
                reset();
                return false;
            }
            H_ = std::move(next);
        } else {
            s_.push_back(s);
            y_.push_back(y);
            if (static_cast<int>(s_.size()) > pairs_) {
                s_.pop_front();
                y_.pop_front();
            }
        }
        return true;
    }

    /// H g.
    Vector apply(const Vector& g) const
    {
        if (pairs_ == 0) return H_ * g;
        // Two-loop recursion with the usual s'y / y'y initial scaling.
        const std::size_t k = s_.size();
        Vector q = g;
        std::vector<double> alpha(k);
        for (std::size_t i = k; i-- > 0;) {
            alpha[i] = s_[i].dot(q) / s_[i].dot(y_[i]);
            q -= alpha[i] * y_[i];
        }
        const double gamma = k ? s_.back().dot(y_.back()) / y_.back().squaredNorm() : 1.0;
        Vector r = gamma * q;
        for (std::size_t i = 0; i < k; ++i) {
            const double beta = y_[i].dot(r) / s_[i].dot(y_[i]);
            r += (alpha[i] - beta) * s_[i];
        }
        return r;
    }

    Matrix dense() const
    {
        if (pairs_ == 0) return H_;
        Matrix H(n_, n_);
        for (Eigen::Index j = 0; j < n_; ++j) H.col(j) = apply(Vector::Unit(n_, j));
        return 0.5 * (H + H.transpose());
    }

    bool limited() const noexcept { return pairs_ > 0; }
    std::size_t stored_pairs() const noexcept { return s_.size(); }
    const std::deque<Vector>& s_pairs() const noexcept { return s_; }
    const std::deque<Vector>& y_pairs() const noexcept { return y_; }

private:
    Eigen::Index n_;
    int pairs_;
    Matrix H_;
    std::deque<Vector> s_;
    std::deque<Vector> y_;
};

// ---------------------------------------------------------------------------
// Exact penalty

/// Penalty subgradient mu grad f + sum_{c_i > 0} grad c_i + sum sign(c_e) grad c_e, with sign(0) = 0.
inline Vector assemble_penalty_gradient(const EvalRecord& r, double mu)
{
    Vector g = mu * r.grad_f;
    for (Eigen::Index i = 0; i < r.ci.size(); ++i)
        if (r.ci[i] > 0.0) g += r.ci_jac.row(i).transpose();
    for (Eigen::Index e = 0; e < r.ce.size(); ++e) {
        if (r.ce[e] > 0.0) g += r.ce_jac.row(e).transpose();
        else if (r.ce[e] < 0.0) g -= r.ce_jac.row(e).transpose();
    }
    return g;
}

/// phi(x; mu) = mu f(x) + v(x).
inline double penalty_value(const EvalRecord& r, double mu) { return mu * r.f + r.viol_ineq() + r.viol_eq(); }

/// An evaluated point on the penalty function.
struct PenaltyPoint
{
    Vector x;
    double phi = 0.0;
    Vector grad;
    EvalRecord rec;
};

// ---------------------------------------------------------------------------
// Line search

template <typename Point>
struct LineSearchResult
{
    bool success = false;
    double t = 0.0;
    std::optional<Point> point;  // accepted point, or best Armijo point on failure
    int evaluations = 0;
};

/// Weak-Wolfe search by doubling then bisection, starting at t = 1.
///
/// `eval(x)` returns a Point with members `phi` and `grad`. On failure the
/// result carries the lowest Armijo-satisfying point seen, if any.
template <typename Point, typename Eval>
LineSearchResult<Point> weak_wolfe_linesearch(Eval&& eval, const Vector& x, const Vector& d, double phi0,
                                              double slope0, double c1, double c2, int max_bisections)
{
    if (!(slope0 < 0.0)) throw ContractError("weak_wolfe_linesearch: direction is not a descent direction");
    LineSearchResult<Point> out;
    double lo = 0.0;
    double hi = kInf;
    double t = 1.0;
    int bisections = 0;
    int doublings = 0;
    double best_phi = kInf;
    for (;;) {
        Point p = eval(Vector(x + t * d));
        ++out.evaluations;
        const bool armijo = std::isfinite(p.phi) && p.phi <= phi0 + c1 * t * slope0;
        if (!armijo) {
            hi = t;
        } else {
            const bool curvature = p.grad.dot(d) >= c2 * slope0;
            if (curvature) {
                out.success = true;
                out.t = t;
                out.point = std::move(p);
                return out;
            }
            if (p.phi < best_phi) {
                best_phi = p.phi;
                out.t = t;
                out.point = p;
            }
            lo = t;
        }
        if (std::isfinite(hi)) {
            if (bisections >= max_bisections) return out;
            ++bisections;
            t = 0.5 * (lo + hi);
        } else {
            if (doublings >= max_bisections) return out;
            ++doublings;
            t *= 2.0;
        }
    }
}

// ---------------------------------------------------------------------------

struct Solution
{
    NamedValues best;
    Vector best_x;
    double f = 0.0;
    double max_violation = 0.0;
    bool best_feasible = false;

    // State at the iterate where the run stopped.
    Vector final_x;
    double final_f = 0.0;
    double final_viol_ineq = 0.0;
    double final_viol_eq = 0.0;
    double stationarity = kInf;
    double final_mu = 0.0;

    // Tolerances the run was judged against.
    double stationarity_tol = 0.0;
    double viol_ineq_tol = 0.0;
    double viol_eq_tol = 0.0;

    Termination termination = Termination::MaxIter;
    std::string message;
    std::vector<IterationRecord> log;
    int iterations = 0;
    double wall_time = 0.0;

    /// Re-derives the convergence conditions from the stored record.
    bool satisfies_convergence() const
    {
        return final_viol_ineq <= viol_ineq_tol && final_viol_eq <= viol_eq_tol && stationarity <= stationarity_tol;
    }
};

namespace solver_detail {

class BestTracker
{
public:
    BestTracker(double tol_i, double tol_e) : tol_i_(tol_i), tol_e_(tol_e) {}

    void offer(const Vector& x, const EvalRecord& r)
    {
        const bool feasible = r.viol_ineq() <= tol_i_ && r.viol_eq() <= tol_e_;
        const double v = r.viol_ineq() + r.viol_eq();
        const bool better = !has_ || (feasible && !feasible_) ||
                            (feasible && feasible_ && r.f < f_) || (!feasible && !feasible_ && v < v_);
        if (!better) return;
        has_ = true;
        feasible_ = feasible;
        x_ = x;
        f_ = r.f;
        v_ = v;
        max_violation_ = r.max_violation();
    }

    void write(const VariableSpec& spec, Solution& s) const
    {
        if (!has_) return;
        s.best_x = x_;
        s.best = unpack(spec, x_);
        s.f = f_;
        s.max_violation = max_violation_;
        s.best_feasible = feasible_;
    }

private:
    double tol_i_, tol_e_;
    bool has_ = false;
    bool feasible_ = false;
    Vector x_;
    double f_ = 0.0;
    double v_ = 0.0;
    double max_violation_ = 0.0;
};

} // namespace solver_detail

/// BFGS-SQP with steered exact penalty, weak-Wolfe line search and a
/// gradient-sampling stationarity test.
inline Solution solve(const ProblemDefinition& problem, const SolverOptions& opts)
{
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    opts.validate();
    const auto start = std::chrono::steady_clock::now();
    const auto n = static_cast<Eigen::Index>(problem.dimension());
    const int cache_size = opts.gradient_cache_size > 0 ? opts.gradient_cache_size
                                                        : static_cast<int>(std::min<Eigen::Index>(50, n + 10));

    Vector x(n);
    if (opts.x0) {
        if (opts.x0->size() != n) throw ContractError("solve: initial point has wrong length");
        x = *opts.x0;
    } else {
        Rng rng(opts.seed);
        for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal();
    }

    Solution sol;
    sol.viol_ineq_tol = opts.viol_ineq_tol;
    sol.viol_eq_tol = opts.viol_eq_tol;
    solver_detail::BestTracker best(opts.viol_ineq_tol, opts.viol_eq_tol);
    InverseHessianApprox H(n, opts.limited_memory_pairs);

    double mu = opts.mu0;
    auto eval_point = [&](const Vector& at) {
        PenaltyPoint p;
        p.x = at;
        p.rec = problem.evaluate(at);
        p.phi = penalty_value(p.rec, mu);
        p.grad = assemble_penalty_gradient(p.rec, mu);
        return p;
    };

    auto finish = [&](Termination t, std::string msg, const PenaltyPoint* cur) {
        sol.termination = t;
        sol.message = std::move(msg);
        sol.iterations = static_cast<int>(sol.log.size());
        if (cur) {
            sol.final_x = cur->x;
            sol.final_f = cur->rec.f;
            sol.final_viol_ineq = cur->rec.viol_ineq();
            sol.final_viol_eq = cur->rec.viol_eq();
        }
        sol.final_mu = mu;
        best.write(problem.variables(), sol);
        sol.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return sol;
    };

    std::optional<PenaltyPoint> cur;
    try {
        cur = eval_point(x);
    } catch (const NumericalError& e) {
        sol.final_x = x;
        return finish(Termination::NumericalError, e.what(), nullptr);
    } catch (const DomainError& e) {
        sol.final_x = x;
        return finish(Termination::NumericalError, e.what(), nullptr);
    }
    best.offer(cur->x, cur->rec);
    sol.stationarity_tol = opts.opt_tol * std::max(1.0, cur->grad.norm());

    const bool constrained = cur->rec.ci.size() + cur->rec.ce.size() > 0;
    struct Cached
    {
        Vector x, grad;
        EvalRecord rec;
    };
    std::deque<Cached> cache;  // accepted iterates
    int ls_failures = 0;
    bool reset_done = false;

    auto stationarity = [&](QPStatus& status) {
        std::vector<const Cached*> near;
        for (const auto& c : cache)
            if ((c.x - cur->x).norm() <= opts.stationarity_radius) near.push_back(&c);
        // Constraints within tolerance of zero sit on a kink of the penalty; their
        // sign terms leave the sampled gradients and return as box generators.
        const EvalRecord& r = cur->rec;
        std::vector<Eigen::Index> act_i, act_e;
        for (Eigen::Index i = 0; i < r.ci.size(); ++i)
            if (std::abs(r.ci[i]) <= opts.viol_ineq_tol) act_i.push_back(i);
        for (Eigen::Index e = 0; e < r.ce.size(); ++e)
            if (std::abs(r.ce[e]) <= opts.viol_eq_tol) act_e.push_back(e);
        const auto na = static_cast<Eigen::Index>(act_i.size() + act_e.size());
        Matrix G(n, static_cast<Eigen::Index>(near.size()));
        Matrix K(n, na);
        Vector lo(na), hi(na);
        for (std::size_t j = 0; j < near.size(); ++j) {
            Vector g = near[j]->grad;
            const EvalRecord& rj = near[j]->rec;
            for (Eigen::Index i : act_i)
                if (rj.ci[i] > 0.0) g -= rj.ci_jac.row(i).transpose();
            for (Eigen::Index e : act_e)
                if (rj.ce[e] != 0.0) g -= (rj.ce[e] > 0.0 ? 1.0 : -1.0) * rj.ce_jac.row(e).transpose();
            G.col(static_cast<Eigen::Index>(j)) = g;
        }
        Eigen::Index col = 0;
        for (Eigen::Index i : act_i) {
            K.col(col) = r.ci_jac.row(i).transpose();
            lo[col] = 0.0;
            hi[col++] = 1.0;
        }
        for (Eigen::Index e : act_e) {
            K.col(col) = r.ce_jac.row(e).transpose();
            lo[col] = -1.0;
            hi[col++] = 1.0;
        }
        const HullResult h = min_norm_in_hull(G, K, lo, hi, opts.qp.tol, opts.qp.max_iter);
        status = h.status;
        return h.measure;
    };

    try {
        for (int k = 1; k <= opts.max_iter; ++k) {
            IterationRecord rec;
            rec.iter = k;
            cache.push_back({cur->x, cur->grad, cur->rec});
            while (static_cast<int>(cache.size()) > cache_size) cache.pop_front();

            QPStatus hull_status = QPStatus::Solved;
            const double stat = stationarity(hull_status);
            sol.stationarity = stat;
            const double vi = cur->rec.viol_ineq();
            const double ve = cur->rec.viol_eq();

            auto log_now = [&](double step, QPStatus qs) {
                rec.mu = mu;
                rec.phi = cur->phi;
                rec.f = cur->rec.f;
                rec.viol_ineq = vi;
                rec.viol_eq = ve;
                rec.stationarity = sol.stationarity;
                rec.step = step;
                rec.qp_status = qs;
                sol.log.push_back(rec);
                if (opts.observer) opts.observer(rec, H);
            };

            if (stat <= sol.stationarity_tol && vi <= opts.viol_ineq_tol && ve <= opts.viol_eq_tol) {
                log_now(0.0, hull_status);
                return finish(Termination::Converged, "stationarity and feasibility tolerances met", &*cur);
            }

            // Search direction, with penalty steering while infeasible.
            Vector d;
            Vector lam;
            bool have_lam = false;
            QPStatus qp_status = QPStatus::Solved;
            if (constrained) {
                const EvalRecord& r = cur->rec;
                Matrix Hd = H.dense();
                SteeringResult sd = steering_direction(Hd, r.grad_f, r.ci, r.ci_jac, r.ce, r.ce_jac, mu, opts.qp);
                if (vi > opts.viol_ineq_tol || ve > opts.viol_eq_tol) {
                    SteeringResult feas = steering_direction(Hd, r.grad_f, r.ci, r.ci_jac, r.ce, r.ce_jac, 0.0, opts.qp);
                    // A degenerate quasi-Newton model can hide a violation decrease
                    // (or report a spurious increase); retry once with H = I.
                    const double small = opts.opt_tol * (vi + ve);
                    if (feas.status != QPStatus::Solved || feas.predicted_violation_reduction <= small) {
                        H.reset();
                        Hd = H.dense();
                        sd = steering_direction(Hd, r.grad_f, r.ci, r.ci_jac, r.ce, r.ce_jac, mu, opts.qp);
                        feas = steering_direction(Hd, r.grad_f, r.ci, r.ci_jac, r.ce, r.ce_jac, 0.0, opts.qp);
                    }
                    const double r0 = feas.predicted_violation_reduction;
                    if (feas.status == QPStatus::Solved && r0 <= small) {
                        log_now(0.0, feas.status);
                        return finish(Termination::StationaryInfeasible,
                                      "linearized constraints admit no violation decrease", &*cur);
                    }
                    int trials = 0;
                    while (feas.status == QPStatus::Solved && sd.predicted_violation_reduction < opts.steering_c_v * r0 &&
                           trials < opts.steering_max_trials) {
                        mu *= opts.steering_c_mu;
                        ++trials;
                        sd = steering_direction(Hd, r.grad_f, r.ci, r.ci_jac, r.ce, r.ce_jac, mu, opts.qp);
                    }
                    if (trials > 0) {
                        cur->phi = penalty_value(cur->rec, mu);
                        cur->grad = assemble_penalty_gradient(cur->rec, mu);
                        cache.clear();
                        cache.push_back({cur->x, cur->grad, cur->rec});
                    }
                }
                qp_status = sd.status;
                d = sd.status == QPStatus::Solved ? sd.d : Vector(-H.apply(cur->grad));
                have_lam = sd.status == QPStatus::Solved;
                lam = sd.multipliers;
            } else {
                d = -H.apply(cur->grad);
            }

            double slope = d.allFinite() ? cur->grad.dot(d) : kNaN;
            if (!(slope < 0.0)) {
                H.reset();
                d = -cur->grad;
                slope = cur->grad.dot(d);
            }
            if (!(slope < 0.0)) {
                log_now(0.0, qp_status);
                return finish(Termination::LineSearchFailed, "penalty subgradient is zero at an infeasible point",
                              &*cur);
            }

            // A trial point that overflows or leaves the domain counts as too long a step.
            auto trial_point = [&](const Vector& at) {
                try {
                    return eval_point(at);
                } catch (const NumericalError&) {
                } catch (const DomainError&) {
                }
                PenaltyPoint p;
                p.x = at;
                p.phi = kInf;
                return p;
            };
            auto ls = weak_wolfe_linesearch<PenaltyPoint>(trial_point, cur->x, d, cur->phi, slope, opts.wolfe_c1,
                                                          opts.wolfe_c2, opts.linesearch_max_bisections);

            double step = 0.0;
            if (ls.success) {
                ls_failures = 0;
                reset_done = false;
            } else {
                ++ls_failures;
            }
            if (ls.point) {
                step = ls.t;
                const Vector s = ls.point->x - cur->x;
                Vector y = ls.point->grad - cur->grad;
                if (opts.curvature == CurvaturePairs::Lagrangian && constrained && have_lam) {
                    auto lag = [&](const EvalRecord& e) {
                        Vector g = mu * e.grad_f;
                        const Eigen::Index p = e.ci.size();
                        if (p) g += e.ci_jac.transpose() * lam.head(p);
                        if (e.ce.size()) g += e.ce_jac.transpose() * lam.tail(e.ce.size());
                        return g;
                    };
                    y = lag(ls.point->rec) - lag(cur->rec);
                }
                H.update(s, y);
                log_now(step, qp_status);
                cur = std::move(*ls.point);
                best.offer(cur->x, cur->rec);
            } else {
                log_now(0.0, qp_status);
            }

            if (ls_failures >= 2) {
                if (reset_done) return finish(Termination::LineSearchFailed, "line search failed after H reset", &*cur);
                H.reset();
                reset_done = true;
                ls_failures = 0;
            }
        }
    } catch (const NumericalError& e) {
        return finish(Termination::NumericalError, e.what(), &*cur);
    } catch (const DomainError& e) {
        return finish(Termination::NumericalError, e.what(), &*cur);
    }
    return finish(Termination::MaxIter, "iteration budget exhausted", &*cur);
}

} // namespace ncvx

#endif // NCVX_SOLVER_HPP
