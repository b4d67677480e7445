#ifndef NCVX_GALLERY_COMMON_HPP
#define NCVX_GALLERY_COMMON_HPP

#include <optional>

#include <Eigen/Dense>

#include "ncvx/problem.hpp"
#include "ncvx/random.hpp"
#include "ncvx/tensor.hpp"

namespace ncvx::gallery {

/// A built example: the problem plus points the harness can use.
struct Instance
{
    ProblemDefinition problem;
    std::optional<Vector> start;           // suggested initial point
    std::optional<Vector> feasible_point;  // known feasible point, when one exists
};

inline Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign fix).
/// With `proper`, the determinant is forced to +1.
inline Matrix random_orthogonal(Rng& rng, Eigen::Index n, bool proper = false)
{
    const Matrix g = gaussian_matrix(rng, n, n);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix Q = qr.householderQ();
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index j = 0; j < n; ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    if (proper && Q.determinant() < 0.0) Q.col(0) *= -1.0;
    return Q;
}

/// Row-major tensor copy of an Eigen matrix.
inline Tensor to_tensor(const Matrix& m)
{
    Tensor t(Shape{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) t[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
    return t;
}

inline Tensor to_tensor(const Vector& v) { return Tensor::vector(std::vector<double>(v.data(), v.data() + v.size())); }

} // namespace ncvx::gallery

#endif // NCVX_GALLERY_COMMON_HPP
