#ifndef NCVX_AUTODIFF_HPP
#define NCVX_AUTODIFF_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ncvx/errors.hpp"
#include "ncvx/tensor.hpp"

namespace ncvx {

/// Operation tag recorded on each tape node.
enum class Op {
    Leaf,
    Constant,
    Add,
    Sub,
    Neg,
    Mul,
    Div,
    Scale,
    MatMul,
    Transpose,
    Reshape,
    Sum,
    Mean,
    Dot,
    Abs,
    Relu,
    Maximum,
    Max,
    PNorm,
    Square,
    Sqrt,
    Exp,
    Log,
    Gather,
    Concat,
};

inline std::string_view op_name(Op op)
{
    switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Neg: return "neg";
    case Op::Mul: return "mul";
    case Op::Div: return "div";
    case Op::Scale: return "scale";
    case Op::MatMul: return "matmul";
    case Op::Transpose: return "transpose";
    case Op::Reshape: return "reshape";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::Dot: return "dot";
    case Op::Abs: return "abs";
    case Op::Relu: return "relu";
    case Op::Maximum: return "maximum";
    case Op::Max: return "max";
    case Op::PNorm: return "pnorm";
    case Op::Square: return "square";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Gather: return "gather";
    case Op::Concat: return "concat";
    }
    return "?";
}

/// Norm order accepted by pnorm.
enum class Norm { L1, L2, Inf };

/// One recorded computation. `value` is computed eagerly when the node is built.
struct ExprNode
{
    Op op = Op::Constant;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor adjoint;
    double param = 0.0;                // Scale factor, or norm order for PNorm
    std::vector<std::size_t> indices;  // Gather positions
    std::string name;                  // Leaf only
    bool requires_grad = false;        // Leaf only
};

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var
{
public:
    Var() = default;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t size() const { return value().size(); }
    double item() const { return value().item(); }

    Tape& tape() const { return *tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

/// Append-only record of a differentiable computation.
///
/// Nodes are stored in creation order, which is a topological order. A tape
/// is confined to one thread; it is neither copyable nor movable because
/// every Var points back to it.
class Tape
{
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(const std::string& name, Tensor value, bool requires_grad = true)
    {
        if (leaves_.contains(name)) throw ContractError("Tape::leaf: duplicate leaf name '" + name + "'");
        ExprNode n;
        n.op = Op::Leaf;
        n.value = std::move(value);
        n.name = name;
        n.requires_grad = requires_grad;
        Var v = push(std::move(n));
        leaves_.emplace(name, v.id());
        return v;
    }

    Var constant(Tensor value)
    {
        ExprNode n;
        n.op = Op::Constant;
        n.value = std::move(value);
        return push(std::move(n));
    }

    Var constant(double v) { return constant(Tensor::scalar(v)); }

    Var push(ExprNode node)
    {
        node.adjoint = Tensor(node.value.shape(), 0.0);
        nodes_.push_back(std::move(node));
        return Var(this, nodes_.size() - 1);
    }

    const ExprNode& node(std::size_t id) const { return nodes_.at(id); }
    const ExprNode& node(Var v) const { return nodes_.at(v.id()); }
    std::size_t size() const noexcept { return nodes_.size(); }

    /// Gradient of a rank-0 root with respect to every leaf that requires grad.
    Gradients backward(Var root)
    {
        check_owner(root);
        if (!root.value().is_scalar())
            throw ContractError("backward: root must be rank-0, got shape " + shape_str(root.shape()));
        return sweep(root.id(), 0);
    }

    /// Gradient of one element (flat row-major index) of a tensor-valued node.
    Gradients backward_element(Var node, std::size_t flat)
    {
        check_owner(node);
        if (flat >= node.size())
            throw ContractError("backward_element: index " + std::to_string(flat) + " out of range");
        return sweep(node.id(), flat);
    }

private:
    void check_owner(Var v) const
    {
        if (&v.tape() != this) throw ContractError("Var belongs to a different tape");
    }

    Gradients sweep(std::size_t root, std::size_t flat);
    void propagate(const ExprNode& n);

    std::vector<ExprNode> nodes_;
    std::map<std::string, std::size_t> leaves_;
};

inline const Tensor& Var::value() const { return tape_->node(id_).value; }

namespace detail {

inline Tape& common_tape(Var a, Var b)
{
    if (&a.tape() != &b.tape()) throw ContractError("operands live on different tapes");
    return a.tape();
}

[[noreturn]] inline void shape_mismatch(Op op, const Shape& a, const Shape& b)
{
    throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

/// Result shape of an elementwise binary op; only rank-0 operands broadcast.
inline Shape broadcast_shape(Op op, const Shape& a, const Shape& b)
{
    if (a == b) return a;
    if (a.empty()) return b;
    if (b.empty()) return a;
    shape_mismatch(op, a, b);
}

template <typename F>
Tensor zip(const Shape& out, const Tensor& a, const Tensor& b, F f)
{
    Tensor r(out);
    const bool sa = a.is_scalar() && !out.empty();
    const bool sb = b.is_scalar() && !out.empty();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(a[sa ? 0 : i], b[sb ? 0 : i]);
    return r;
}

template <typename F>
Tensor map(const Tensor& a, F f)
{
    Tensor r(a.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = f(a[i]);
    return r;
}

inline Var unary(Var a, Op op, Tensor value, double param = 0.0)
{
    ExprNode n;
    n.op = op;
    n.inputs = {a.id()};
    n.value = std::move(value);
    n.param = param;
    return a.tape().push(std::move(n));
}

inline Var binary(Var a, Var b, Op op, Tensor value)
{
    Tape& t = common_tape(a, b);
    ExprNode n;
    n.op = op;
    n.inputs = {a.id(), b.id()};
    n.value = std::move(value);
    return t.push(std::move(n));
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Lowest flat index attaining the maximum of key(x_i).
template <typename Key>
std::size_t argmax_first(const Tensor& x, Key key)
{
    std::size_t best = 0;
    double best_v = key(x[0]);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double v = key(x[i]);
        if (v > best_v) {
            best_v = v;
            best = i;
        }
    }
    return best;
}

/// Accumulate `g` into `adj`, summing over elements when adj is a broadcast scalar.
inline void accumulate(Tensor& adj, const Tensor& g, double factor = 1.0)
{
    if (adj.size() == g.size()) {
        for (std::size_t i = 0; i < g.size(); ++i) adj[i] += factor * g[i];
    } else {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
        adj[0] += factor * s;
    }
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic

inline Var add(Var a, Var b)
{
    const Shape s = detail::broadcast_shape(Op::Add, a.shape(), b.shape());
    return detail::binary(a, b, Op::Add, detail::zip(s, a.value(), b.value(), std::plus<>{}));
}

inline Var sub(Var a, Var b)
{
    const Shape s = detail::broadcast_shape(Op::Sub, a.shape(), b.shape());
    return detail::binary(a, b, Op::Sub, detail::zip(s, a.value(), b.value(), std::minus<>{}));
}

inline Var mul(Var a, Var b)
{
    const Shape s = detail::broadcast_shape(Op::Mul, a.shape(), b.shape());
    return detail::binary(a, b, Op::Mul, detail::zip(s, a.value(), b.value(), std::multiplies<>{}));
}

inline Var div(Var a, Var b)
{
    const Shape s = detail::broadcast_shape(Op::Div, a.shape(), b.shape());
    for (double v : b.value().data())
        if (v == 0.0) throw DomainError("div: division by zero");
    return detail::binary(a, b, Op::Div, detail::zip(s, a.value(), b.value(), std::divides<>{}));
}

inline Var neg(Var a)
{
    return detail::unary(a, Op::Neg, detail::map(a.value(), [](double x) { return -x; }));
}

inline Var scale(Var a, double c)
{
    return detail::unary(a, Op::Scale, detail::map(a.value(), [c](double x) { return c * x; }), c);
}

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var a) { return scale(a, c); }
inline Var operator*(Var a, double c) { return scale(a, c); }
inline Var operator/(Var a, double c) { return scale(a, 1.0 / c); }
inline Var operator+(Var a, double c) { return add(a, a.tape().constant(c)); }
inline Var operator+(double c, Var a) { return add(a.tape().constant(c), a); }
inline Var operator-(Var a, double c) { return sub(a, a.tape().constant(c)); }
inline Var operator-(double c, Var a) { return sub(a.tape().constant(c), a); }
inline Var operator/(double c, Var a) { return div(a.tape().constant(c), a); }

// ---------------------------------------------------------------------------
// Linear algebra and shape

/// Matrix product. Supports (m,k)@(k,n), (m,k)@(k), (k)@(k,n) and (k)@(k).
inline Var matmul(Var a, Var b)
{
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.empty() || sb.empty() || sa.size() > 2 || sb.size() > 2) detail::shape_mismatch(Op::MatMul, sa, sb);
    const std::size_t m = sa.size() == 2 ? sa[0] : 1;
    const std::size_t k = sa.back();
    const std::size_t kb = sb[0];
    const std::size_t n = sb.size() == 2 ? sb[1] : 1;
    if (k != kb) detail::shape_mismatch(Op::MatMul, sa, sb);

    Shape out;
    if (sa.size() == 2) out.push_back(m);
    if (sb.size() == 2) out.push_back(n);
    Tensor r(out);
    const auto& A = a.value();
    const auto& B = b.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = A[i * k + p];
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) r[i * n + j] += aip * B[p * n + j];
        }
    return detail::binary(a, b, Op::MatMul, std::move(r));
}

/// Swaps the axes of a matrix; identity on rank <= 1.
inline Var transpose(Var a)
{
    const auto& v = a.value();
    if (v.rank() > 2) throw ShapeError("transpose: rank " + std::to_string(v.rank()) + " unsupported");
    if (v.rank() < 2) return detail::unary(a, Op::Transpose, v);
    const std::size_t r = v.shape()[0];
    const std::size_t c = v.shape()[1];
    Tensor t(Shape{c, r});
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) t[j * r + i] = v[i * c + j];
    return detail::unary(a, Op::Transpose, std::move(t));
}

inline Var reshape(Var a, Shape shape) { return detail::unary(a, Op::Reshape, a.value().reshaped(std::move(shape))); }

inline Var sum(Var a)
{
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    return detail::unary(a, Op::Sum, Tensor::scalar(s));
}

inline Var mean(Var a)
{
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    return detail::unary(a, Op::Mean, Tensor::scalar(s / static_cast<double>(a.size())));
}

/// Inner product of two equally shaped tensors.
inline Var dot(Var a, Var b)
{
    if (a.shape() != b.shape()) detail::shape_mismatch(Op::Dot, a.shape(), b.shape());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.value()[i] * b.value()[i];
    return detail::binary(a, b, Op::Dot, Tensor::scalar(s));
}

/// Gathers elements by flat row-major position into a tensor of `shape`.
inline Var gather(Var a, std::vector<std::size_t> indices, Shape shape)
{
    if (shape_size(shape) != indices.size())
        throw ShapeError("gather: " + std::to_string(indices.size()) + " indices for shape " + shape_str(shape));
    Tensor r(std::move(shape));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= a.size())
            throw ShapeError("gather: index " + std::to_string(indices[i]) + " out of range for shape " +
                             shape_str(a.shape()));
        r[i] = a.value()[indices[i]];
    }
    ExprNode n;
    n.op = Op::Gather;
    n.inputs = {a.id()};
    n.value = std::move(r);
    n.indices = std::move(indices);
    return a.tape().push(std::move(n));
}

/// Elements [begin, end) of the flattened tensor, as a rank-1 tensor.
inline Var slice(Var a, std::size_t begin, std::size_t end)
{
    if (begin >= end || end > a.size())
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for shape " + shape_str(a.shape()));
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    return gather(a, std::move(idx), Shape{end - begin});
}

/// Single element by flat index, as a scalar.
inline Var element(Var a, std::size_t flat) { return gather(a, {flat}, Shape{}); }

/// Single element of a matrix.
inline Var element(Var a, std::size_t i, std::size_t j)
{
    if (a.value().rank() != 2) throw ShapeError("element(i,j): expected a matrix, got " + shape_str(a.shape()));
    return element(a, i * a.shape()[1] + j);
}

/// Concatenation along axis 0. Scalars count as length-1 vectors; matrices must
/// share their column count. The result is a vector unless any input is a matrix.
inline Var concat(const std::vector<Var>& parts)
{
    if (parts.empty()) throw ShapeError("concat: no inputs");
    Tape& t = parts.front().tape();
    std::size_t cols = 0;
    bool any_matrix = false;
    for (const Var& p : parts) {
        if (&p.tape() != &t) throw ContractError("concat: operands live on different tapes");
        if (p.value().rank() > 2) throw ShapeError("concat: rank > 2 unsupported");
        if (p.value().rank() == 2) {
            if (any_matrix && p.shape()[1] != cols) detail::shape_mismatch(Op::Concat, Shape{0, cols}, p.shape());
            any_matrix = true;
            cols = p.shape()[1];
        }
    }
    std::vector<double> data;
    std::size_t rows = 0;
    for (const Var& p : parts) {
        if (any_matrix && p.value().rank() != 2) detail::shape_mismatch(Op::Concat, Shape{0, cols}, p.shape());
        data.insert(data.end(), p.value().data().begin(), p.value().data().end());
        rows += any_matrix ? p.shape()[0] : p.size();
    }
    ExprNode n;
    n.op = Op::Concat;
    for (const Var& p : parts) n.inputs.push_back(p.id());
    n.value = any_matrix ? Tensor(Shape{rows, cols}, std::move(data)) : Tensor(Shape{rows}, std::move(data));
    return t.push(std::move(n));
}

// ---------------------------------------------------------------------------
// Nonlinear elementwise and reductions

inline Var abs(Var a) { return detail::unary(a, Op::Abs, detail::map(a.value(), [](double x) { return std::fabs(x); })); }

inline Var relu(Var a)
{
    return detail::unary(a, Op::Relu, detail::map(a.value(), [](double x) { return x > 0.0 ? x : 0.0; }));
}

inline Var square(Var a) { return detail::unary(a, Op::Square, detail::map(a.value(), [](double x) { return x * x; })); }

inline Var sqrt(Var a)
{
    for (double x : a.value().data())
        if (!(x > 0.0)) throw DomainError("sqrt: non-positive input " + std::to_string(x));
    return detail::unary(a, Op::Sqrt, detail::map(a.value(), [](double x) { return std::sqrt(x); }));
}

inline Var exp(Var a) { return detail::unary(a, Op::Exp, detail::map(a.value(), [](double x) { return std::exp(x); })); }

inline Var log(Var a)
{
    for (double x : a.value().data())
        if (!(x > 0.0)) throw DomainError("log: non-positive input " + std::to_string(x));
    return detail::unary(a, Op::Log, detail::map(a.value(), [](double x) { return std::log(x); }));
}

/// Elementwise maximum; ties send the gradient to the first operand.
inline Var maximum(Var a, Var b)
{
    const Shape s = detail::broadcast_shape(Op::Maximum, a.shape(), b.shape());
    return detail::binary(a, b, Op::Maximum,
                          detail::zip(s, a.value(), b.value(), [](double x, double y) { return x >= y ? x : y; }));
}

/// Largest element; ties resolve to the lowest flat index.
inline Var max(Var a)
{
    const std::size_t i = detail::argmax_first(a.value(), [](double x) { return x; });
    return detail::unary(a, Op::Max, Tensor::scalar(a.value()[i]));
}

/// Vector p-norm of the flattened tensor.
inline Var pnorm(Var a, Norm p)
{
    const auto& v = a.value();
    double r = 0.0;
    switch (p) {
    case Norm::L1:
        for (double x : v.data()) r += std::fabs(x);
        break;
    case Norm::L2:
        for (double x : v.data()) r += x * x;
        r = std::sqrt(r);
        break;
    case Norm::Inf:
        r = std::fabs(v[detail::argmax_first(v, [](double x) { return std::fabs(x); })]);
        break;
    }
    return detail::unary(a, Op::PNorm, Tensor::scalar(r), static_cast<double>(static_cast<int>(p)));
}

// ---------------------------------------------------------------------------
// Reverse sweep

inline Gradients Tape::sweep(std::size_t root, std::size_t flat)
{
    for (std::size_t i = 0; i <= root; ++i) std::fill(nodes_[i].adjoint.data().begin(), nodes_[i].adjoint.data().end(), 0.0);
    std::vector<char> live(root + 1, 0);
    live[root] = 1;
    nodes_[root].adjoint[flat] = 1.0;

    for (std::size_t i = root + 1; i-- > 0;) {
        if (!live[i]) continue;
        for (std::size_t in : nodes_[i].inputs) live[in] = 1;
        propagate(nodes_[i]);
    }

    Gradients out;
    for (const auto& [name, id] : leaves_) {
        const ExprNode& n = nodes_[id];
        if (!n.requires_grad) continue;
        out.emplace(name, id <= root && live[id] ? n.adjoint : Tensor(n.value.shape(), 0.0));
    }
    return out;
}

inline void Tape::propagate(const ExprNode& n)
{
    using detail::accumulate;
    const Tensor& g = n.adjoint;
    auto in = [&](std::size_t k) -> ExprNode& { return nodes_[n.inputs[k]]; };
    // Broadcast-aware read of an operand value at output position i.
    auto at = [](const Tensor& t, std::size_t i) { return t.is_scalar() ? t[0] : t[i]; };

    switch (n.op) {
    case Op::Leaf:
    case Op::Constant:
        break;
    case Op::Add:
        accumulate(in(0).adjoint, g);
        accumulate(in(1).adjoint, g);
        break;
    case Op::Sub:
        accumulate(in(0).adjoint, g);
        accumulate(in(1).adjoint, g, -1.0);
        break;
    case Op::Neg:
        accumulate(in(0).adjoint, g, -1.0);
        break;
    case Op::Scale:
        accumulate(in(0).adjoint, g, n.param);
        break;
    case Op::Mul:
    case Op::Div:
    case Op::Maximum: {
        const Tensor& a = in(0).value;
        const Tensor& b = in(1).value;
        Tensor ga(g.shape()), gb(g.shape());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double x = at(a, i), y = at(b, i);
            if (n.op == Op::Mul) {
                ga[i] = g[i] * y;
                gb[i] = g[i] * x;
            } else if (n.op == Op::Div) {
                ga[i] = g[i] / y;
                gb[i] = -g[i] * x / (y * y);
            } else {
                (x >= y ? ga[i] : gb[i]) = g[i];
            }
        }
        accumulate(in(0).adjoint, ga);
        accumulate(in(1).adjoint, gb);
        break;
    }
    case Op::MatMul: {
        const Tensor& A = in(0).value;
        const Tensor& B = in(1).value;
        const std::size_t m = A.rank() == 2 ? A.shape()[0] : 1;
        const std::size_t k = A.shape().back();
        const std::size_t cols = B.rank() == 2 ? B.shape()[1] : 1;
        Tensor& gA = in(0).adjoint;
        Tensor& gB = in(1).adjoint;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                const double gij = g[i * cols + j];
                if (gij == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    gA[i * k + p] += gij * B[p * cols + j];
                    gB[p * cols + j] += A[i * k + p] * gij;
                }
            }
        break;
    }
    case Op::Transpose: {
        Tensor& ga = in(0).adjoint;
        if (ga.rank() < 2) {
            accumulate(ga, g);
        } else {
            const std::size_t r = ga.shape()[0], c = ga.shape()[1];
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
        }
        break;
    }
    case Op::Reshape:
        for (std::size_t i = 0; i < g.size(); ++i) in(0).adjoint[i] += g[i];
        break;
    case Op::Sum:
        for (auto& x : in(0).adjoint.data()) x += g[0];
        break;
    case Op::Mean: {
        const double w = g[0] / static_cast<double>(in(0).value.size());
        for (auto& x : in(0).adjoint.data()) x += w;
        break;
    }
    case Op::Dot: {
        const Tensor& a = in(0).value;
        const Tensor& b = in(1).value;
        Tensor& ga = in(0).adjoint;
        Tensor& gb = in(1).adjoint;
        for (std::size_t i = 0; i < a.size(); ++i) {
            ga[i] += g[0] * b[i];
            gb[i] += g[0] * a[i];
        }
        break;
    }
    case Op::Abs:
    case Op::Relu:
    case Op::Square:
    case Op::Sqrt:
    case Op::Exp:
    case Op::Log: {
        const Tensor& x = in(0).value;
        Tensor& ga = in(0).adjoint;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double d = 0.0;
            switch (n.op) {
            case Op::Abs: d = detail::sign(x[i]); break;
            case Op::Relu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
            case Op::Square: d = 2.0 * x[i]; break;
            case Op::Sqrt: d = 0.5 / n.value[i]; break;
            case Op::Exp: d = n.value[i]; break;
            case Op::Log: d = 1.0 / x[i]; break;
            default: break;
            }
            ga[i] += g[i] * d;
        }
        break;
    }
    case Op::Max: {
        const Tensor& x = in(0).value;
        in(0).adjoint[detail::argmax_first(x, [](double v) { return v; })] += g[0];
        break;
    }
    case Op::PNorm: {
        const Tensor& x = in(0).value;
        Tensor& ga = in(0).adjoint;
        switch (static_cast<Norm>(static_cast<int>(n.param))) {
        case Norm::L1:
            for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0] * detail::sign(x[i]);
            break;
        case Norm::L2:
            if (n.value[0] > 0.0)
                for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[0] * x[i] / n.value[0];
            break;
        case Norm::Inf: {
            const std::size_t i = detail::argmax_first(x, [](double v) { return std::fabs(v); });
            ga[i] += g[0] * detail::sign(x[i]);
            break;
        }
        }
        break;
    }
    case Op::Gather: {
        Tensor& ga = in(0).adjoint;
        for (std::size_t i = 0; i < n.indices.size(); ++i) ga[n.indices[i]] += g[i];
        break;
    }
    case Op::Concat: {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
            Tensor& ga = in(k).adjoint;
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[off + i];
            off += ga.size();
        }
        break;
    }
    }
}

} // namespace ncvx

#endif // NCVX_AUTODIFF_HPP
