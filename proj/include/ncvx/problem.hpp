#ifndef NCVX_PROBLEM_HPP
#define NCVX_PROBLEM_HPP

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ncvx/autodiff.hpp"
#include "ncvx/errors.hpp"
#include "ncvx/tensor.hpp"

namespace ncvx {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Ordered list of named tensor variables. Declaration order is packing order.
class VariableSpec
{
public:
    VariableSpec() = default;
    VariableSpec(std::initializer_list<std::pair<std::string, Shape>> vars)
    {
        for (const auto& [name, shape] : vars) add(name, shape);
    }

    VariableSpec& add(const std::string& name, Shape shape)
    {
        for (const auto& [n, s] : vars_)
            if (n == name) throw ContractError("VariableSpec: duplicate variable '" + name + "'");
        for (auto d : shape)
            if (d == 0) throw ContractError("VariableSpec: variable '" + name + "' has a zero dimension");
        vars_.emplace_back(name, std::move(shape));
        return *this;
    }

    const std::vector<std::pair<std::string, Shape>>& entries() const noexcept { return vars_; }
    std::size_t count() const noexcept { return vars_.size(); }

    std::size_t dimension() const
    {
        std::size_t n = 0;
        for (const auto& [name, shape] : vars_) n += shape_size(shape);
        return n;
    }

private:
    std::vector<std::pair<std::string, Shape>> vars_;
};

using NamedValues = std::map<std::string, Tensor>;

/// Flattens named values in declaration order, each row-major.
inline Vector pack(const VariableSpec& spec, const NamedValues& values)
{
    Vector x(static_cast<Eigen::Index>(spec.dimension()));
    Eigen::Index off = 0;
    for (const auto& [name, shape] : spec.entries()) {
        auto it = values.find(name);
        if (it == values.end()) throw ContractError("pack: missing variable '" + name + "'");
        if (it->second.shape() != shape)
            throw ShapeError("pack: variable '" + name + "' has shape " + shape_str(it->second.shape()) +
                             ", declared " + shape_str(shape));
        for (double v : it->second.data()) x[off++] = v;
    }
    return x;
}

inline NamedValues unpack(const VariableSpec& spec, const Vector& x)
{
    if (static_cast<std::size_t>(x.size()) != spec.dimension())
        throw ContractError("unpack: vector length " + std::to_string(x.size()) + " != dimension " +
                            std::to_string(spec.dimension()));
    NamedValues out;
    Eigen::Index off = 0;
    for (const auto& [name, shape] : spec.entries()) {
        Tensor t(shape);
        for (auto& v : t.data()) v = x[off++];
        out.emplace(name, std::move(t));
    }
    return out;
}

/// Named leaves handed to a problem callback.
class Variables
{
public:
    void bind(const std::string& name, Var v) { vars_.emplace(name, v); }

    Var operator[](const std::string& name) const
    {
        auto it = vars_.find(name);
        if (it == vars_.end()) throw ContractError("unknown variable '" + name + "'");
        return it->second;
    }

private:
    std::map<std::string, Var> vars_;
};

/// What a problem callback returns: objective plus inequality (c <= 0) and
/// equality (c = 0) constraint expressions. Empty lists mean "no constraints
/// of that kind". Tensor-valued constraints are flattened row-major.
struct Terms
{
    Var f;
    std::vector<Var> ci;
    std::vector<Var> ce;
};

using Callback = std::function<Terms(Tape&, const Variables&)>;

/// Values and first derivatives of a problem at one point.
struct EvalRecord
{
    double f = 0.0;
    Vector grad_f;
    Vector ci;      // inequality values, one per scalar constraint
    Matrix ci_jac;  // p x n
    Vector ce;
    Matrix ce_jac;  // q x n

    double viol_ineq() const
    {
        double s = 0.0;
        for (Eigen::Index i = 0; i < ci.size(); ++i) s += std::max(ci[i], 0.0);
        return s;
    }

    double viol_eq() const { return ce.size() ? ce.lpNorm<1>() : 0.0; }

    /// Largest single-constraint violation.
    double max_violation() const
    {
        double m = 0.0;
        for (Eigen::Index i = 0; i < ci.size(); ++i) m = std::max(m, ci[i]);
        for (Eigen::Index i = 0; i < ce.size(); ++i) m = std::max(m, std::fabs(ce[i]));
        return m;
    }
};

/// Named variables plus the user callback producing objective and constraints.
///
/// Immutable after construction apart from the constraint counts latched on
/// the first evaluation; later evaluations must reproduce them.
class ProblemDefinition
{
public:
    ProblemDefinition(VariableSpec vars, Callback eval) : vars_(std::move(vars)), eval_(std::move(eval))
    {
        if (vars_.dimension() == 0) throw ContractError("ProblemDefinition: no variables");
        if (!eval_) throw ContractError("ProblemDefinition: empty callback");
    }

    ProblemDefinition(const ProblemDefinition& o) : vars_(o.vars_), eval_(o.eval_), counts_(o.counts()) {}

    const VariableSpec& variables() const noexcept { return vars_; }
    std::size_t dimension() const { return vars_.dimension(); }

    /// Runs the callback on a fresh tape and differentiates every scalar term.
    EvalRecord evaluate(const Vector& x) const
    {
        const std::size_t n = dimension();
        if (static_cast<std::size_t>(x.size()) != n)
            throw ContractError("evaluate: point has length " + std::to_string(x.size()) + ", expected " +
                                std::to_string(n));

        Tape tape;
        Variables bound;
        const NamedValues values = unpack(vars_, x);
        for (const auto& [name, shape] : vars_.entries()) bound.bind(name, tape.leaf(name, values.at(name)));

        Terms t = eval_(tape, bound);
        if (!t.f.valid()) throw ContractError("evaluate: callback returned no objective");
        if (t.f.size() != 1)
            throw ShapeError("evaluate: objective must be scalar, got shape " + shape_str(t.f.shape()));

        const std::size_t p = flat_count(t.ci);
        const std::size_t q = flat_count(t.ce);
        latch_counts(p, q);

        EvalRecord r;
        r.f = t.f.value()[0];
        r.grad_f = flatten(tape.backward_element(t.f, 0));
        r.ci.resize(static_cast<Eigen::Index>(p));
        r.ci_jac.resize(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n));
        r.ce.resize(static_cast<Eigen::Index>(q));
        r.ce_jac.resize(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(n));
        fill_rows(tape, t.ci, r.ci, r.ci_jac);
        fill_rows(tape, t.ce, r.ce, r.ce_jac);

        const bool finite = std::isfinite(r.f) && r.grad_f.allFinite() && r.ci.allFinite() && r.ce.allFinite() &&
                            r.ci_jac.allFinite() && r.ce_jac.allFinite();
        if (!finite)
            throw NumericalError("evaluate: non-finite objective or constraint value",
                                 std::vector<double>(x.data(), x.data() + x.size()));
        return r;
    }

    /// Objective value only; no differentiation.
    double objective(const Vector& x) const
    {
        Tape tape;
        Variables bound;
        const NamedValues values = unpack(vars_, x);
        for (const auto& [name, shape] : vars_.entries()) bound.bind(name, tape.leaf(name, values.at(name), false));
        return eval_(tape, bound).f.value()[0];
    }

    std::optional<std::pair<std::size_t, std::size_t>> counts() const
    {
        std::lock_guard lock(mutex_);
        return counts_;
    }

private:
    static std::size_t flat_count(const std::vector<Var>& vs)
    {
        std::size_t k = 0;
        for (const Var& v : vs) k += v.size();
        return k;
    }

    void latch_counts(std::size_t p, std::size_t q) const
    {
        std::lock_guard lock(mutex_);
        if (!counts_) {
            counts_ = std::make_pair(p, q);
        } else if (counts_->first != p || counts_->second != q) {
            throw ContractError("evaluate: constraint counts changed from (" + std::to_string(counts_->first) + ", " +
                                std::to_string(counts_->second) + ") to (" + std::to_string(p) + ", " +
                                std::to_string(q) + ")");
        }
    }

    Vector flatten(const Gradients& g) const
    {
        Vector out(static_cast<Eigen::Index>(dimension()));
        Eigen::Index off = 0;
        for (const auto& [name, shape] : vars_.entries())
            for (double v : g.at(name).data()) out[off++] = v;
        return out;
    }

    void fill_rows(Tape& tape, const std::vector<Var>& terms, Vector& values, Matrix& jac) const
    {
        Eigen::Index row = 0;
        for (const Var& term : terms)
            for (std::size_t k = 0; k < term.size(); ++k, ++row) {
                values[row] = term.value()[k];
                jac.row(row) = flatten(tape.backward_element(term, k)).transpose();
            }
    }

    VariableSpec vars_;
    Callback eval_;
    mutable std::mutex mutex_;
    mutable std::optional<std::pair<std::size_t, std::size_t>> counts_;
};

} // namespace ncvx

#endif // NCVX_PROBLEM_HPP
