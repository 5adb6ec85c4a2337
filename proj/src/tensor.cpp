// SPDX-License-Identifier: Apache-2.0
#include "cxrfuse/tensor.hpp"

#include <cmath>
#include <sstream>

#include "cxrfuse/errors.hpp"

namespace cxrfuse {

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (auto d : shape) {
        if (d == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
    }
}

}  // namespace

Tensor::Tensor() : shape_{1}, data_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (shape_numel(shape_) != data_.size()) {
        throw DimensionError("shape " + shape_string(shape_) + " does not match " + std::to_string(data_.size()) +
                             " values");
    }
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    if (rows.size() == 0) throw DimensionError("matrix needs at least one row");
    const std::size_t cols = rows.begin()->size();
    std::vector<double> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols) throw DimensionError("ragged matrix rows");
        data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(shape_));
    }
    return shape_[axis];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape_));
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape_));
    return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }
double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }

Tensor Tensor::reshaped(Shape shape) const {
    validate_shape(shape);
    if (shape_numel(shape) != data_.size()) {
        throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace kernels {

void gemm_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = po + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            const double* brow = pb + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

void gemm_nt_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = pb + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            po[i * n + j] += acc;
        }
    }
}

void gemm_tn_acc(const Tensor& a, const Tensor& b, Tensor& out) {
    const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    double* po = out.data().data();
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = pa + p * m;
        const double* brow = pb + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_string(a.shape()) + " x " +
                             shape_string(b.shape()));
    }
    Tensor out({a.rows(), b.cols()});
    gemm_acc(a, b, out);
    return out;
}

Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.size() != b.size()) {
        throw DimensionError("cannot accumulate " + shape_string(b.shape()) + " into " + shape_string(a.shape()));
    }
    auto pa = a.data();
    auto pb = b.data();
    for (std::size_t i = 0; i < pa.size(); ++i) pa[i] += pb[i];
}

}  // namespace kernels

}  // namespace cxrfuse
