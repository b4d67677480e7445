#ifndef NCVX_GALLERY_PROCRUSTES_HPP
#define NCVX_GALLERY_PROCRUSTES_HPP

#include <cstdint>

#include <Eigen/SVD>

#include "ncvx/gallery/common.hpp"
#include "ncvx/gallery/config.hpp"

namespace ncvx::gallery {

/// min ||WA - B||_F^2 s.t. W'W = I, with B = QA for a random rotation Q.
struct ProcrustesConfig
{
    std::int64_t n = 5;
    std::uint64_t seed = 1;
    bool identity_target = false;  // B = A

    void validate() const { require_config(n >= 2, "n", "must be at least 2"); }

    static ProcrustesConfig from_map(const ConfigMap& map)
    {
        ConfigReader r(map);
        ProcrustesConfig c;
        c.n = r.integer("n", c.n);
        c.seed = r.unsigned_integer("seed", c.seed);
        c.identity_target = r.boolean("identity_target", c.identity_target);
        r.reject_unknown();
        return c;
    }

    ConfigMap to_map() const
    {
        return {{"n", std::to_string(n)}, {"seed", std::to_string(seed)},
                {"identity_target", identity_target ? "true" : "false"}};
    }
};

struct ProcrustesInstance : Instance
{
    Matrix A;
    Matrix B;
    Matrix rotation;  // Q used to build B
};

/// Closed-form minimizer over O(n): W = U V' where B A' = U S V'.
inline Matrix procrustes_svd_solution(const Matrix& A, const Matrix& B)
{
    Eigen::JacobiSVD<Matrix> svd(B * A.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().transpose();
}

inline ProcrustesInstance build_procrustes(const ProcrustesConfig& cfg)
{
    cfg.validate();
    const auto n = static_cast<Eigen::Index>(cfg.n);
    Rng rng(cfg.seed);
    const Matrix A = gaussian_matrix(rng, n, n);
    const Matrix Q = cfg.identity_target ? Matrix(Matrix::Identity(n, n)) : random_orthogonal(rng, n, true);
    const Matrix B = Q * A;
    const Tensor At = to_tensor(A);
    const Tensor Bt = to_tensor(B);
    const Tensor I = to_tensor(Matrix(Matrix::Identity(n, n)));

    const auto un = static_cast<std::size_t>(n);
    VariableSpec vars{{"W", Shape{un, un}}};
    Callback fn = [At, Bt, I](Tape& tape, const Variables& v) {
        const Var W = v["W"];
        Terms t;
        t.f = sum(square(matmul(W, tape.constant(At)) - tape.constant(Bt)));
        t.ce = {matmul(transpose(W), W) - tape.constant(I)};
        return t;
    };

    Vector identity(n * n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) identity[i * n + j] = i == j ? 1.0 : 0.0;

    return ProcrustesInstance{{ProblemDefinition(std::move(vars), std::move(fn)), identity, identity}, A, B, Q};
}

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_PROCRUSTES_HPP
