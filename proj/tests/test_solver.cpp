#include <gtest/gtest.h>

#include "invariants.hpp"
#include "ncvx/solver.hpp"
#include "oracles.hpp"

using namespace ncvx;

namespace {

Vector random_vec(Rng& rng, Eigen::Index n)
{
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

struct Quadratic
{
    Matrix A;
    Vector b;
    Vector xstar;
};

// 0.5 x'Ax - b'x with A = Q diag(1..10) Q'
Quadratic random_quadratic(std::uint64_t seed, Eigen::Index n = 10)
{
    Rng rng(seed);
    Matrix M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) M.col(i) = random_vec(rng, n);
    const Matrix Q = Eigen::HouseholderQR<Matrix>(M).householderQ();
    const Vector eig = Vector::LinSpaced(n, 1.0, 10.0);
    Quadratic q;
    q.A = Q * eig.asDiagonal() * Q.transpose();
    q.A = 0.5 * (q.A + q.A.transpose()).eval();
    q.b = random_vec(rng, n);
    q.xstar = q.A.ldlt().solve(q.b);
    return q;
}

ProblemDefinition quadratic_problem(const Quadratic& q)
{
    const Tensor A = [&] {
        Tensor t(Shape{static_cast<std::size_t>(q.A.rows()), static_cast<std::size_t>(q.A.cols())});
        for (Eigen::Index i = 0; i < q.A.rows(); ++i)
            for (Eigen::Index j = 0; j < q.A.cols(); ++j) t.at(i, j) = q.A(i, j);
        return t;
    }();
    const Tensor b = Tensor::vector(std::vector<double>(q.b.data(), q.b.data() + q.b.size()));
    return ProblemDefinition(VariableSpec{{"x", Shape{static_cast<std::size_t>(q.b.size())}}},
                             [A, b](Tape& t, const Variables& v) {
                                 const Var x = v["x"];
                                 Terms out;
                                 out.f = 0.5 * dot(x, matmul(t.constant(A), x)) - dot(t.constant(b), x);
                                 return out;
                             });
}

ProblemDefinition scalar_problem(std::function<Terms(Tape&, Var)> f, std::size_t n = 1)
{
    return ProblemDefinition(VariableSpec{{"x", Shape{n}}},
                             [f](Tape& t, const Variables& v) { return f(t, v["x"]); });
}

} // namespace

TEST(Bfgs, UpdateMatchesTextbookFormula)
{
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
        const Eigen::Index n = 5;
        Matrix B(n, n);
        for (Eigen::Index i = 0; i < n; ++i) B.col(i) = random_vec(rng, n);
        const Matrix H = B * B.transpose() + Matrix::Identity(n, n);
        const Vector s = random_vec(rng, n);
        Vector y = random_vec(rng, n);
        if (s.dot(y) <= 0.0) y = -y;
        const double r = 1.0 / s.dot(y);
        const Matrix I = Matrix::Identity(n, n);
        const Matrix ref = (I - r * s * y.transpose()) * H * (I - r * y * s.transpose()) + r * s * s.transpose();
        const Matrix got = bfgs_update(H, s, y);
        EXPECT_LE((got - ref).norm(), 1e-10 * ref.norm());
        EXPECT_LE((got * y - s).norm(), 1e-10 * s.norm());  // secant condition
        EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(got).eigenvalues().minCoeff(), 0.0);
    }
}

TEST(Bfgs, SkipsPairsWithoutPositiveCurvature)
{
    const Matrix H = Matrix::Identity(2, 2);
    Vector s(2), y(2);
    s << 1, 0;
    y << -1, 0;
    EXPECT_EQ(bfgs_update(H, s, y), H);
    InverseHessianApprox approx(2, 0);
    EXPECT_FALSE(approx.update(s, y));
    EXPECT_EQ(approx.dense(), H);
}

TEST(Bfgs, LimitedMemoryKeepsLatestSecantPair)
{
    Rng rng(9);
    InverseHessianApprox lm(6, 3);
    Vector s, y;
    for (int k = 0; k < 5; ++k) {
        s = random_vec(rng, 6);
        y = s + 0.1 * random_vec(rng, 6);
        ASSERT_TRUE(lm.update(s, y));
    }
    EXPECT_EQ(lm.stored_pairs(), 3u);
    EXPECT_LE((lm.apply(y) - s).norm(), 1e-10);
    EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(lm.dense()).eigenvalues().minCoeff(), 0.0);
    lm.reset();
    EXPECT_EQ(lm.stored_pairs(), 0u);
}

TEST(Bfgs, DenseMatchesTwoLoopWithUnitScaling)
{
    // Dense updates from H = I and the two-loop recursion agree when the
    // two-loop initial scaling equals 1, which holds for y = s.
    Rng rng(12);
    InverseHessianApprox dense(4, 0), lm(4, 10);
    for (int k = 0; k < 3; ++k) {
        const Vector s = random_vec(rng, 4);
        dense.update(s, s);
        lm.update(s, s);
    }
    EXPECT_LE((dense.dense() - lm.dense()).norm(), 1e-10);
}

TEST(LineSearch, AcceptedStepSatisfiesWeakWolfe)
{
    struct P
    {
        double phi;
        Vector grad;
    };
    // phi(x) = |x0| + 2 x1^2 from x = (1, 1) along d = (-3, -1).
    auto eval = [](const Vector& x) { return P{std::abs(x[0]) + 2 * x[1] * x[1], Vector{{x[0] > 0 ? 1.0 : -1.0, 4 * x[1]}}}; };
    const Vector x{{1.0, 1.0}}, d{{-3.0, -1.0}};
    const P p0 = eval(x);
    const double slope = p0.grad.dot(d);
    const auto r = weak_wolfe_linesearch<P>(eval, x, d, p0.phi, slope, 1e-4, 0.5, 50);
    ASSERT_TRUE(r.success);
    EXPECT_LE(r.point->phi, p0.phi + 1e-4 * r.t * slope);
    EXPECT_GE(r.point->grad.dot(d), 0.5 * slope);
    EXPECT_THROW((weak_wolfe_linesearch<P>(eval, x, -d, p0.phi, -slope, 1e-4, 0.5, 50)), ContractError);
}

TEST(LineSearch, UnboundedBelowReportsFailureWithBestPoint)
{
    struct P
    {
        double phi;
        Vector grad;
    };
    auto eval = [](const Vector& x) { return P{-x[0], Vector{{-1.0}}}; };
    const auto r = weak_wolfe_linesearch<P>(eval, Vector{{0.0}}, Vector{{1.0}}, 0.0, -1.0, 1e-4, 0.5, 10);
    EXPECT_FALSE(r.success);
    ASSERT_TRUE(r.point.has_value());
    EXPECT_DOUBLE_EQ(r.t, 1024.0);
}

TEST(Penalty, GradientUsesZeroSignAtKinks)
{
    EvalRecord r;
    r.f = 2.0;
    r.grad_f = Vector{{1.0, 0.0}};
    r.ci = Vector{{0.0, 3.0}};
    r.ci_jac = Matrix{{5.0, 5.0}, {0.0, 1.0}};
    r.ce = Vector{{0.0, -2.0}};
    r.ce_jac = Matrix{{7.0, 7.0}, {1.0, 1.0}};
    EXPECT_DOUBLE_EQ(penalty_value(r, 0.5), 1.0 + 3.0 + 2.0);
    const Vector g = assemble_penalty_gradient(r, 0.5);
    EXPECT_EQ(g, (Vector{{0.5 - 1.0, 1.0 - 1.0}}));
}

TEST(Solver, QuadraticsConvergeWithinFiftyIterations)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const Quadratic q = random_quadratic(seed);
        SolverOptions o;
        o.seed = seed;
        invariants::Monitor mon;
        mon.attach(o);
        const Solution s = solve(quadratic_problem(q), o);
        mon.finish(s);
        EXPECT_EQ(s.termination, Termination::Converged) << "seed " << seed;
        EXPECT_LE(s.iterations, 50) << "seed " << seed;
        EXPECT_LE((s.final_x - q.xstar).lpNorm<Eigen::Infinity>(), 1e-6) << "seed " << seed;
        EXPECT_TRUE(mon.ok()) << mon.report();
    }
}

TEST(Solver, IteratesMatchTextbookBfgs)
{
    const Quadratic q = random_quadratic(3);
    const ProblemDefinition p = quadratic_problem(q);
    Vector x0 = Vector::Ones(10);
    SolverOptions o;
    o.x0 = x0;
    o.max_iter = 10;
    o.opt_tol = 1e-30;
    std::vector<Vector> xs;
    // The log does not carry x; recover iterates by re-solving with growing budgets.
    for (int k = 1; k <= 10; ++k) {
        o.max_iter = k;
        xs.push_back(solve(p, o).final_x);
    }
    const auto ref = oracle::textbook_bfgs([&](const Vector& x) { return 0.5 * x.dot(q.A * x) - q.b.dot(x); },
                                           [&](const Vector& x) { return Vector(q.A * x - q.b); }, x0, 10);
    for (int k = 0; k < 10; ++k)
        EXPECT_LE((xs[static_cast<std::size_t>(k)] - ref.iterates[static_cast<std::size_t>(k + 1)]).lpNorm<Eigen::Infinity>(), 1e-8)
            << "iteration " << k + 1;
}

TEST(Solver, NonsmoothUnconstrainedReachesKink)
{
    // |x0| + 2|x1 - 1| + 0.5 x2^2 has its minimum on two kinks.
    const ProblemDefinition p = scalar_problem(
        [](Tape& t, Var x) {
            Terms r;
            r.f = abs(element(x, 0)) + 2.0 * abs(element(x, 1) - 1.0) + 0.5 * square(element(x, 2));
            (void)t;
            return r;
        },
        3);
    SolverOptions o;
    o.x0 = Vector{{0.7, -0.4, 2.0}};
    const Solution s = solve(p, o);
    EXPECT_LE(std::abs(s.f), 1e-6);
    EXPECT_LE(std::abs(s.best_x[1] - 1.0), 1e-6);
}

TEST(Solver, ConstrainedProblemsKeepInvariants)
{
    // min x0 + x1 on the unit circle, then with an inequality version.
    const ProblemDefinition circle = scalar_problem(
        [](Tape&, Var x) {
            Terms r;
            r.f = sum(x);
            r.ce = {dot(x, x) - 1.0};
            return r;
        },
        2);
    const ProblemDefinition disk = scalar_problem(
        [](Tape&, Var x) {
            Terms r;
            r.f = sum(x) + abs(element(x, 0) - element(x, 1));
            r.ci = {dot(x, x) - 1.0, -1.0 - element(x, 0)};
            return r;
        },
        2);
    const double opt = -std::sqrt(2.0);
    for (const auto* p : {&circle, &disk}) {
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            SolverOptions o;
            o.seed = seed;
            invariants::Monitor mon;
            mon.attach(o);
            const Solution s = solve(*p, o);
            mon.finish(s);
            EXPECT_TRUE(mon.ok()) << mon.report();
            // Penalty pairs only see the constraint curvature from one side, so the smooth
            // circle can crawl to the rounding floor instead of meeting opt_tol.
            EXPECT_TRUE(s.termination == Termination::Converged || s.termination == Termination::LineSearchFailed)
                << "seed " << seed << ": " << s.message;
            // Stationarity is certified over a 1e-4 ball.
            EXPECT_NEAR(s.f, opt, 1e-4) << "seed " << seed;
            EXPECT_LE(s.max_violation, 1e-8);
        }
    }
}

TEST(Solver, LimitedMemoryAndLagrangianPairsAlsoConverge)
{
    const ProblemDefinition circle = scalar_problem(
        [](Tape&, Var x) {
            Terms r;
            r.f = sum(x);
            r.ce = {dot(x, x) - 1.0};
            return r;
        },
        2);
    SolverOptions lm;
    lm.limited_memory_pairs = 5;
    lm.seed = 2;
    EXPECT_NEAR(solve(circle, lm).f, -std::sqrt(2.0), 1e-6);
    SolverOptions lag;
    lag.curvature = CurvaturePairs::Lagrangian;
    lag.seed = 2;
    invariants::Monitor mon;
    mon.attach(lag);
    const Solution s = solve(circle, lag);
    mon.finish(s);
    EXPECT_EQ(s.termination, Termination::Converged);
    EXPECT_NEAR(s.f, -std::sqrt(2.0), 1e-6);
    EXPECT_TRUE(mon.ok()) << mon.report();
}

TEST(Solver, SameSeedSameRun)
{
    const ProblemDefinition p = quadratic_problem(random_quadratic(7));
    SolverOptions o;
    o.seed = 42;
    const Solution a = solve(p, o), b = solve(p, o);
    ASSERT_EQ(a.log.size(), b.log.size());
    for (std::size_t i = 0; i < a.log.size(); ++i) {
        EXPECT_EQ(a.log[i].phi, b.log[i].phi);
        EXPECT_EQ(a.log[i].stationarity, b.log[i].stationarity);
        EXPECT_EQ(a.log[i].step, b.log[i].step);
    }
    EXPECT_EQ(a.final_x, b.final_x);
    o.seed = 43;
    EXPECT_NE(solve(p, o).log.front().phi, a.log.front().phi);
}

TEST(Termination, EachCodeIsReachable)
{
    // Converged
    {
        const Solution s = solve(scalar_problem([](Tape&, Var x) {
                                     Terms r;
                                     r.f = sum(square(x - 3.0));
                                     return r;
                                 }),
                                 SolverOptions{});
        EXPECT_EQ(s.termination, Termination::Converged);
        EXPECT_TRUE(s.satisfies_convergence());
    }
    // MaxIter
    {
        SolverOptions o;
        o.max_iter = 2;
        const Solution s = solve(quadratic_problem(random_quadratic(1)), o);
        EXPECT_EQ(s.termination, Termination::MaxIter);
        EXPECT_EQ(s.iterations, 2);
    }
    // LineSearchFailed: unbounded below, no point satisfies the curvature condition.
    {
        const Solution s = solve(scalar_problem([](Tape&, Var x) {
                                     Terms r;
                                     r.f = -sum(x);
                                     return r;
                                 }),
                                 SolverOptions{});
        EXPECT_EQ(s.termination, Termination::LineSearchFailed);
    }
    // StationaryInfeasible: x^2 + 1 <= 0 cannot be met; its violation is stationary at 0.
    {
        SolverOptions o;
        o.x0 = Vector::Constant(1, 0.0);
        const Solution s = solve(scalar_problem([](Tape&, Var x) {
                                     Terms r;
                                     r.f = sum(x);
                                     r.ci = {square(x) + 1.0};
                                     return r;
                                 }),
                                 o);
        EXPECT_EQ(s.termination, Termination::StationaryInfeasible);
        EXPECT_FALSE(s.best_feasible);
    }
    // NumericalError: the start lies outside the domain of log.
    {
        SolverOptions o;
        o.x0 = Vector::Constant(1, -1.0);
        const Solution s = solve(scalar_problem([](Tape&, Var x) {
                                     Terms r;
                                     r.f = sum(log(x));
                                     return r;
                                 }),
                                 o);
        EXPECT_EQ(s.termination, Termination::NumericalError);
    }
}

TEST(Termination, TrialPointsOutsideTheDomainShortenTheStep)
{
    // -log(x) + x has its minimum at 1; long steps leave the domain.
    SolverOptions o;
    o.x0 = Vector::Constant(1, 0.05);
    const Solution s = solve(scalar_problem([](Tape&, Var x) {
                                 Terms r;
                                 r.f = sum(x) - sum(log(x));
                                 return r;
                             }),
                             o);
    EXPECT_EQ(s.termination, Termination::Converged);
    EXPECT_NEAR(s.final_x[0], 1.0, 1e-6);
}

TEST(Options, ValidationRejectsBadValues)
{
    const ProblemDefinition p = quadratic_problem(random_quadratic(1, 2));
    auto expect_bad = [&](auto mutate) {
        SolverOptions o;
        mutate(o);
        EXPECT_THROW(solve(p, o), ContractError);
    };
    expect_bad([](SolverOptions& o) { o.opt_tol = 0.0; });
    expect_bad([](SolverOptions& o) { o.mu0 = -1.0; });
    expect_bad([](SolverOptions& o) { o.wolfe_c2 = o.wolfe_c1 / 2; });
    expect_bad([](SolverOptions& o) { o.steering_c_mu = 1.0; });
    expect_bad([](SolverOptions& o) { o.limited_memory_pairs = -1; });
    expect_bad([](SolverOptions& o) { o.x0 = Vector::Zero(5); });
}
