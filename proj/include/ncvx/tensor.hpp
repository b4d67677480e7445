#ifndef NCVX_TENSOR_HPP
#define NCVX_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ncvx/errors.hpp"

namespace ncvx {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_str(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

/// Dense row-major array of doubles. Rank-0 tensors are scalars with one element.
class Tensor
{
public:
    Tensor() : data_(1, 0.0) {}

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_size(shape_), fill)
    {
        check_dims();
    }

    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        check_dims();
        if (data_.size() != shape_size(shape_))
            throw ShapeError("Tensor: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor vector(std::vector<double> v)
    {
        const std::size_t n = v.size();
        return Tensor(Shape{n}, std::move(v));
    }

    /// Row-major matrix from nested initializer lists.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        const std::size_t r = rows.size();
        const std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("Tensor::matrix: ragged rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor(Shape{r, c}, std::move(data));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool is_scalar() const noexcept { return shape_.empty(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    double item() const
    {
        if (data_.size() != 1)
            throw ShapeError("Tensor::item: tensor of shape " + shape_str(shape_) + " is not a scalar");
        return data_[0];
    }

    double at(std::size_t i, std::size_t j) const { return data_[i * shape_.at(1) + j]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_.at(1) + j]; }

    Tensor reshaped(Shape shape) const
    {
        if (shape_size(shape) != data_.size())
            throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
        return Tensor(std::move(shape), data_);
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_dims() const
    {
        for (auto d : shape_)
            if (d == 0) throw ShapeError("Tensor: zero-length dimension in shape " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

} // namespace ncvx

#endif // NCVX_TENSOR_HPP
