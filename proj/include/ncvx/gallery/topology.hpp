#ifndef NCVX_GALLERY_TOPOLOGY_HPP
#define NCVX_GALLERY_TOPOLOGY_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "ncvx/gallery/common.hpp"
#include "ncvx/gallery/config.hpp"

namespace ncvx::gallery {

/// Serial spring chain fixed at node 0; spring i joins nodes i-1 and i.
/// Densities x set stiffness k_i = k_min + x_i (k_max - k_min).
struct TopologyConfig
{
    std::int64_t d = 2;
    double v0 = 0.5;
    double k_min = 0.1;
    double k_max = 1.0;
    double load = 1.0;  // total external force, spread evenly over the free nodes
    bool dip = false;   // x = sigmoid(W beta + b) with a fixed random input beta
    std::int64_t dip_width = 4;
    std::uint64_t seed = 1;

    void validate() const
    {
        require_config(d >= 2, "d", "must be at least 2");
        require_config(v0 > 0.0 && v0 < 1.0, "v0", "must lie in (0, 1)");
        require_config(k_min > 0.0 && std::isfinite(k_min), "k_min", "must be positive");
        require_config(k_max > k_min && std::isfinite(k_max), "k_max", "must exceed k_min");
        require_config(std::isfinite(load) && load != 0.0, "load", "must be finite and non-zero");
        require_config(dip_width >= 1, "dip_width", "must be at least 1");
    }

    static TopologyConfig from_map(const ConfigMap& map)
    {
        ConfigReader r(map);
        TopologyConfig c;
        c.d = r.integer("d", c.d);
        c.v0 = r.real("v0", c.v0);
        c.k_min = r.real("k_min", c.k_min);
        c.k_max = r.real("k_max", c.k_max);
        c.load = r.real("load", c.load);
        c.dip = r.boolean("dip", c.dip);
        c.dip_width = r.integer("dip_width", c.dip_width);
        c.seed = r.unsigned_integer("seed", c.seed);
        r.reject_unknown();
        return c;
    }

    ConfigMap to_map() const
    {
        return {{"d", std::to_string(d)},         {"v0", format_double(v0)},
                {"k_min", format_double(k_min)},  {"k_max", format_double(k_max)},
                {"load", format_double(load)},    {"dip", dip ? "true" : "false"},
                {"dip_width", std::to_string(dip_width)}, {"seed", std::to_string(seed)}};
    }
};

struct TopologyInstance : Instance
{
    Vector force;
    Matrix beta;  // DIP input, empty otherwise
};

/// Tridiagonal stiffness matrix of the chain.
inline Matrix chain_stiffness(const Vector& x, double k_min, double k_max)
{
    const Eigen::Index d = x.size();
    const Vector k = (k_min + (k_max - k_min) * x.array()).matrix();
    Matrix K = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        K(i, i) += k[i];
        if (i > 0) {
            K(i - 1, i - 1) += k[i];
            K(i - 1, i) -= k[i];
            K(i, i - 1) -= k[i];
        }
    }
    return K;
}

/// Compliance f'u with K(x) u = f.
inline double chain_compliance(const Vector& x, const Vector& f, double k_min, double k_max)
{
    const Matrix K = chain_stiffness(x, k_min, k_max);
    return f.dot(K.ldlt().solve(f));
}

inline TopologyInstance build_topology(const TopologyConfig& cfg)
{
    cfg.validate();
    const auto d = static_cast<std::size_t>(cfg.d);
    const auto di = static_cast<Eigen::Index>(cfg.d);
    const Vector f = Vector::Constant(di, cfg.load / static_cast<double>(cfg.d));
    const Tensor ft = to_tensor(f);
    const double k_min = cfg.k_min, dk = cfg.k_max - cfg.k_min, budget = cfg.v0 * static_cast<double>(cfg.d);
    const bool dip = cfg.dip;

    Rng rng(cfg.seed);
    const auto w = static_cast<std::size_t>(cfg.dip_width);
    Matrix beta;
    if (dip) beta = gaussian_matrix(rng, cfg.dip_width, 1);
    const Tensor beta_t = dip ? to_tensor(beta) : Tensor();

    Callback fn = [=](Tape& tape, const Variables& v) {
        Var x;
        if (dip) {
            const Var z = matmul(v["W"], tape.constant(beta_t)) + v["b"];
            x = reshape(1.0 / (1.0 + exp(-z)), Shape{d});
        } else {
            x = v["x"];
        }
        const Var u = v["u"];
        const Var k = k_min + dk * x;
        // Spring elongations u_i - u_{i-1} with u_{-1} = 0, then nodal forces.
        const Var stretch = u - concat({tape.constant(0.0), slice(u, 0, d - 1)});
        const Var tension = k * stretch;
        const Var Ku = tension - concat({slice(tension, 1, d), tape.constant(0.0)});
        Terms t;
        t.f = dot(u, Ku);
        t.ce = {Ku - tape.constant(ft)};
        if (dip) t.ci = {sum(x) - budget};
        else t.ci = {sum(x) - budget, -x, x - 1.0};
        return t;
    };

    VariableSpec vars;
    if (dip) {
        vars.add("W", Shape{d, w});
        vars.add("b", Shape{d, 1});
    } else {
        vars.add("x", Shape{d});
    }
    vars.add("u", Shape{d});

    // Uniform design at the volume budget with its equilibrium displacement.
    const Vector xs = Vector::Constant(di, cfg.v0);
    const Vector us = chain_stiffness(xs, cfg.k_min, cfg.k_max).ldlt().solve(f);
    const auto nw = static_cast<Eigen::Index>(d * w);
    Vector start, feasible;
    if (dip) {
        const double logit = std::log(cfg.v0 / (1.0 - cfg.v0));
        start = Vector::Zero(nw + 2 * di);
        start.segment(nw, di).setConstant(logit);
        feasible = start;
        feasible.tail(di) = us;
    } else {
        start = Vector::Zero(2 * di);
        start.head(di) = xs;
        feasible = start;
        feasible.tail(di) = us;
    }
    return TopologyInstance{{ProblemDefinition(std::move(vars), std::move(fn)), start, feasible}, f, beta};
}

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_TOPOLOGY_HPP
