#ifndef NCVX_GALLERY_PDE_HPP
#define NCVX_GALLERY_PDE_HPP

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "ncvx/gallery/common.hpp"
#include "ncvx/gallery/config.hpp"

namespace ncvx::gallery {

enum class PdeSource
{
    Zero,      // g = 0, solution u = 0
    Constant,  // g = value, solution u = -value/2 x(1 - x)
    Sine       // g = -pi^2 sin(pi x), solution u = sin(pi x)
};

inline std::string to_string(PdeSource s)
{
    switch (s) {
    case PdeSource::Zero: return "zero";
    case PdeSource::Constant: return "const";
    case PdeSource::Sine: return "sine";
    }
    return "?";
}

/// u'' = g on (0, 1) with u(0) = u(1) = 0, u = sum_k theta_k sin(k pi x),
/// enforced at M interior collocation points.
struct PdeConfig
{
    std::int64_t basis = 15;       // K
    std::int64_t collocation = 30; // M
    PdeSource source = PdeSource::Constant;
    double value = -2.0;           // g for the constant source
    bool supervised = false;       // objective 1/N sum (u(x_i) - y_i)^2 instead of 0
    std::int64_t samples = 20;     // N
    std::uint64_t seed = 1;

    void validate() const
    {
        require_config(basis >= 2, "basis", "must be at least 2");
        require_config(collocation >= basis, "collocation", "must be at least basis");
        require_config(std::isfinite(value), "value", "must be finite");
        require_config(samples >= 1, "samples", "must be at least 1");
    }

    static PdeConfig from_map(const ConfigMap& map)
    {
        ConfigReader r(map);
        PdeConfig c;
        c.basis = r.integer("basis", c.basis);
        c.collocation = r.integer("collocation", c.collocation);
        const std::string src = r.text("source", to_string(c.source));
        if (src == "zero") c.source = PdeSource::Zero;
        else if (src == "const") c.source = PdeSource::Constant;
        else if (src == "sine") c.source = PdeSource::Sine;
        else throw ConfigError("source", "expected zero, const or sine, got '" + src + "'");
        c.value = r.real("value", c.value);
        c.supervised = r.boolean("supervised", c.supervised);
        c.samples = r.integer("samples", c.samples);
        c.seed = r.unsigned_integer("seed", c.seed);
        r.reject_unknown();
        return c;
    }

    ConfigMap to_map() const
    {
        return {{"basis", std::to_string(basis)},       {"collocation", std::to_string(collocation)},
                {"source", to_string(source)},          {"value", format_double(value)},
                {"supervised", supervised ? "true" : "false"}, {"samples", std::to_string(samples)},
                {"seed", std::to_string(seed)}};
    }

    double g(double x) const
    {
        switch (source) {
        case PdeSource::Zero: return 0.0;
        case PdeSource::Constant: return value;
        case PdeSource::Sine: return -std::numbers::pi * std::numbers::pi * std::sin(std::numbers::pi * x);
        }
        return 0.0;
    }

    /// Analytic solution of the boundary value problem.
    double exact(double x) const
    {
        switch (source) {
        case PdeSource::Zero: return 0.0;
        case PdeSource::Constant: return -0.5 * value * x * (1.0 - x);
        case PdeSource::Sine: return std::sin(std::numbers::pi * x);
        }
        return 0.0;
    }
};

struct PdeInstance : Instance
{
    Vector points;   // collocation points j / (M + 1)
    Vector samples;  // supervision inputs (supervised mode)
};

/// u(x; theta).
inline double sine_series(const Vector& theta, double x)
{
    double u = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k)
        u += theta[k] * std::sin(static_cast<double>(k + 1) * std::numbers::pi * x);
    return u;
}

inline PdeInstance build_pde(const PdeConfig& cfg)
{
    cfg.validate();
    const auto K = static_cast<Eigen::Index>(cfg.basis);
    const auto M = static_cast<Eigen::Index>(cfg.collocation);
    const double pi = std::numbers::pi;

    Vector pts(M), rhs(M);
    Matrix D2(M, K);  // second derivative of each basis function at each point
    for (Eigen::Index j = 0; j < M; ++j) {
        pts[j] = static_cast<double>(j + 1) / static_cast<double>(M + 1);
        rhs[j] = cfg.g(pts[j]);
        for (Eigen::Index k = 0; k < K; ++k) {
            const double w = static_cast<double>(k + 1) * pi;
            D2(j, k) = -w * w * std::sin(w * pts[j]);
        }
    }

    Vector xs, ys;
    Matrix S;
    if (cfg.supervised) {
        Rng rng(cfg.seed);
        const auto N = static_cast<Eigen::Index>(cfg.samples);
        xs.resize(N);
        ys.resize(N);
        S.resize(N, K);
        for (Eigen::Index i = 0; i < N; ++i) {
            xs[i] = rng.uniform();
            ys[i] = cfg.exact(xs[i]);
            for (Eigen::Index k = 0; k < K; ++k) S(i, k) = std::sin(static_cast<double>(k + 1) * pi * xs[i]);
        }
    }

    const Tensor D2t = to_tensor(D2), rhs_t = to_tensor(rhs);
    const Tensor St = cfg.supervised ? to_tensor(S) : Tensor();
    const Tensor yt = cfg.supervised ? to_tensor(ys) : Tensor();
    const bool supervised = cfg.supervised;
    Callback fn = [=](Tape& tape, const Variables& v) {
        const Var theta = v["theta"];
        Terms t;
        if (supervised) t.f = mean(square(matmul(tape.constant(St), theta) - tape.constant(yt)));
        else t.f = 0.0 * sum(theta);
        t.ce = {matmul(tape.constant(D2t), theta) - tape.constant(rhs_t)};
        return t;
    };

    std::optional<Vector> feasible;
    if (cfg.source == PdeSource::Zero) feasible = Vector::Zero(K);
    else if (cfg.source == PdeSource::Sine) feasible = Vector::Unit(K, 0);

    return PdeInstance{{ProblemDefinition(VariableSpec{{"theta", Shape{static_cast<std::size_t>(K)}}}, std::move(fn)),
                        std::nullopt, feasible},
                       pts, xs};
}

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_PDE_HPP
