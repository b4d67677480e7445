#ifndef NCVX_GALLERY_ODL_HPP
#define NCVX_GALLERY_ODL_HPP

#include <cmath>
#include <cstdint>

#include "ncvx/gallery/common.hpp"
#include "ncvx/gallery/config.hpp"

namespace ncvx::gallery {

/// Orthogonal dictionary learning: min 1/m ||q'Y||_1 s.t. q'q = 1.
struct OdlConfig
{
    std::int64_t n = 10;
    std::int64_t m = 300;
    double theta = 0.3;
    std::uint64_t seed = 1;

    void validate() const
    {
        require_config(n >= 2, "n", "must be at least 2");
        require_config(static_cast<double>(m) >= 10.0 * static_cast<double>(n) * std::log(static_cast<double>(n)),
                       "m", "must be at least 10 n log n");
        require_config(theta > 0.0 && theta <= 0.5, "theta", "must lie in (0, 0.5]");
    }

    static OdlConfig from_map(const ConfigMap& map)
    {
        ConfigReader r(map);
        OdlConfig c;
        c.n = r.integer("n", c.n);
        c.m = r.integer("m", c.m);
        c.theta = r.real("theta", c.theta);
        c.seed = r.unsigned_integer("seed", c.seed);
        r.reject_unknown();
        return c;
    }

    ConfigMap to_map() const
    {
        return {{"n", std::to_string(n)}, {"m", std::to_string(m)}, {"theta", format_double(theta)},
                {"seed", std::to_string(seed)}};
    }
};

struct OdlInstance : Instance
{
    Matrix dictionary;  // orthogonal A; columns are the targets
    Matrix data;        // Y = A X
};

/// Y = A X with A Haar-orthogonal and X Bernoulli(theta)-Gaussian.
inline OdlInstance build_odl(const OdlConfig& cfg)
{
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(cfg.n);
    const auto m = static_cast<Eigen::Index>(cfg.m);
    Rng rng(cfg.seed);
    const Matrix A = random_orthogonal(rng, n);
    Matrix X(n, m);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < m; ++j) {
            const double g = rng.normal();
            X(i, j) = rng.bernoulli(cfg.theta) ? g : 0.0;
        }
    const Matrix Y = A * X;
    const Tensor Yt = to_tensor(Y);
    const double inv_m = 1.0 / static_cast<double>(m);

    VariableSpec vars{{"q", Shape{static_cast<std::size_t>(n), 1}}};
    Callback fn = [Yt, inv_m](Tape& tape, const Variables& v) {
        const Var q = v["q"];
        const Var Y = tape.constant(Yt);
        Terms t;
        t.f = inv_m * pnorm(matmul(transpose(q), Y), Norm::L1);
        t.ce = {matmul(transpose(q), q) - 1.0};
        return t;
    };

    OdlInstance out{{ProblemDefinition(std::move(vars), std::move(fn)), std::nullopt, Vector(A.col(0))}, A, Y};
    return out;
}

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_ODL_HPP
