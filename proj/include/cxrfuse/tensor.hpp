// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cxrfuse {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Dense row-major array of doubles. Every extent is positive and
/// `product(shape) == size()` always holds.
class Tensor {
public:
    /// Scalar zero of shape [1].
    Tensor();
    /// Zero-filled tensor.
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);
    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    /// 2-D tensor from nested rows; all rows must have equal length.
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }

    /// Rows/cols of a rank-2 tensor; throws DimensionError otherwise.
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    Tensor reshaped(Shape shape) const;

    bool all_finite() const noexcept;

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Raw kernels shared by the autodiff ops. All operate on rank-2 tensors and
/// accumulate into `out` (which must already have the right shape).
namespace kernels {

/// out += a(m×k) · b(k×n)
void gemm_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a(m×k) · b(n×k)ᵀ
void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out);
/// out += a(k×m)ᵀ · b(k×n)
void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// a += b elementwise (same size).
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace kernels

}  // namespace cxrfuse
