#include <gtest/gtest.h>

#include "ad_graphs.hpp"

using namespace ncvx;

TEST(Tensor, ShapesAndAccess)
{
    const Tensor m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
    EXPECT_EQ(m.shape(), (Shape{2, 3}));
    EXPECT_EQ(m.at(1, 2), 6.0);
    EXPECT_EQ(Tensor::scalar(3.0).item(), 3.0);
    EXPECT_TRUE(Tensor::scalar(1.0).is_scalar());
    EXPECT_THROW(m.item(), ShapeError);
    EXPECT_THROW(m.reshaped(Shape{4}), ShapeError);
    EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
    EXPECT_THROW(Tensor(Shape{2}, std::vector<double>{1, 2, 3}), ShapeError);
    EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
    EXPECT_EQ(m.reshaped(Shape{3, 2}).at(2, 1), 6.0);
}

TEST(Autodiff, EveryOpMatchesFiniteDifferences)
{
    Rng rng(11);
    for (const auto& c : adcheck::op_cases()) {
        for (int trial = 0; trial < 3; ++trial) {
            const auto g = adcheck::check_away_from_kinks(c.build, rng);
            EXPECT_LE(g.rel_error(), 1e-6) << c.name << "\nanalytic " << g.analytic.transpose() << "\nnumeric  "
                                           << g.numeric.transpose();
        }
    }
}

TEST(Autodiff, RandomCompositeGraphsMatchFiniteDifferences)
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto build = [seed](Tape& t, Var x, Var y, adcheck::KinkMargin& k) {
            Rng r(seed * 7919);
            return adcheck::random_graph(t, x, y, r, k);
        };
        Rng pts(seed);
        const auto g = adcheck::check_away_from_kinks(build, pts);
        EXPECT_LE(g.rel_error(), 1e-6) << "graph " << seed;
    }
}

namespace {

Gradients grad_of(const std::function<Var(Tape&, Var)>& f, const Tensor& at)
{
    Tape t;
    const Var x = t.leaf("x", at);
    return t.backward(f(t, x));
}

} // namespace

TEST(Autodiff, KinkConventions)
{
    const Tensor z = Tensor::vector({0.0, -2.0, 3.0});
    EXPECT_EQ(grad_of([](Tape&, Var x) { return sum(abs(x)); }, z).at("x").values(),
              (std::vector<double>{0.0, -1.0, 1.0}));
    EXPECT_EQ(grad_of([](Tape&, Var x) { return sum(relu(x)); }, z).at("x").values(),
              (std::vector<double>{0.0, 0.0, 1.0}));
    // Ties in max go to the lowest index.
    const Tensor tie = Tensor::vector({1.0, 5.0, 5.0});
    EXPECT_EQ(grad_of([](Tape&, Var x) { return max(x); }, tie).at("x").values(),
              (std::vector<double>{0.0, 1.0, 0.0}));
    EXPECT_EQ(grad_of([](Tape&, Var x) { return pnorm(x, Norm::Inf); }, Tensor::vector({-5.0, 5.0})).at("x").values(),
              (std::vector<double>{-1.0, 0.0}));
    // maximum ties favour the first operand.
    const auto gm = [] {
        Tape t;
        const Var a = t.leaf("a", Tensor::vector({1.0, 2.0}));
        const Var b = t.leaf("b", Tensor::vector({1.0, 3.0}));
        return t.backward(sum(maximum(a, b)));
    }();
    EXPECT_EQ(gm.at("a").values(), (std::vector<double>{1.0, 0.0}));
    EXPECT_EQ(gm.at("b").values(), (std::vector<double>{0.0, 1.0}));
    // The 2-norm of zero has zero gradient rather than NaN.
    const auto g0 = grad_of([](Tape&, Var x) { return pnorm(x, Norm::L2); }, Tensor::vector({0.0, 0.0}));
    EXPECT_EQ(g0.at("x").values(), (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(grad_of([](Tape&, Var x) { return pnorm(x, Norm::L1); }, z).at("x").values(),
              (std::vector<double>{0.0, -1.0, 1.0}));
}

TEST(Autodiff, DomainErrors)
{
    Tape t;
    const Var x = t.leaf("x", Tensor::vector({1.0, 0.0}));
    EXPECT_THROW(sqrt(x), DomainError);
    EXPECT_THROW(log(x), DomainError);
    EXPECT_THROW(log(-1.0 * x + 0.5), DomainError);
    EXPECT_THROW(1.0 / x, DomainError);
    EXPECT_NO_THROW(sqrt(x + 1.0));
}

TEST(Autodiff, ShapeErrors)
{
    Tape t;
    const Var a = t.leaf("a", Tensor(Shape{2, 3}, 1.0));
    const Var b = t.leaf("b", Tensor(Shape{2}, 1.0));
    EXPECT_THROW(a + b, ShapeError);
    EXPECT_THROW(matmul(a, b), ShapeError);
    EXPECT_THROW(dot(a, b), ShapeError);
    EXPECT_THROW(slice(b, 1, 1), ShapeError);
    EXPECT_THROW(gather(b, {2}, Shape{}), ShapeError);
    EXPECT_THROW(concat({a, b}), ShapeError);
    EXPECT_THROW(reshape(a, Shape{5}), ShapeError);
    EXPECT_THROW(t.backward(a), ContractError);
    EXPECT_THROW(t.leaf("a", Tensor::scalar(1.0)), ContractError);
}

TEST(Autodiff, TapesDoNotMix)
{
    Tape t1, t2;
    const Var a = t1.leaf("a", Tensor::scalar(1.0));
    const Var b = t2.leaf("b", Tensor::scalar(2.0));
    EXPECT_THROW(a + b, ContractError);
    EXPECT_THROW(t2.backward(a), ContractError);
}

TEST(Autodiff, RepeatedUseAccumulates)
{
    Tape t;
    const Var x = t.leaf("x", Tensor::scalar(3.0));
    const Var y = x * x + x * x * x;  // 2x + 3x^2 = 33
    EXPECT_DOUBLE_EQ(t.backward(y).at("x").item(), 33.0);
    // A second sweep starts from clean adjoints.
    EXPECT_DOUBLE_EQ(t.backward(y).at("x").item(), 33.0);
}

TEST(Autodiff, BackwardElementPicksOneOutput)
{
    Tape t;
    const Var x = t.leaf("x", Tensor::vector({1.0, 2.0, 3.0}));
    const Var y = square(x);
    const auto g = t.backward_element(y, 1);
    EXPECT_EQ(g.at("x").values(), (std::vector<double>{0.0, 4.0, 0.0}));
    EXPECT_THROW(t.backward_element(y, 3), ContractError);
}

TEST(Autodiff, ConstantLeavesGetNoGradient)
{
    Tape t;
    const Var x = t.leaf("x", Tensor::scalar(2.0));
    const Var c = t.leaf("c", Tensor::scalar(5.0), false);
    const auto g = t.backward(x * c);
    EXPECT_DOUBLE_EQ(g.at("x").item(), 5.0);
    EXPECT_FALSE(g.contains("c"));
}
