#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace atnl {

// Dense row-major tensor of doubles. Everything in this project is rank 1
// or 2; shape is kept generic so gradients can mirror values exactly.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor row_vector(std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }

    // 2-D accessors; rows()/cols() treat a rank-1 tensor as a single row.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::span<const double> row(std::size_t i) const;

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Shared numeric kernels. The autodiff graph and the plain fast-path
// forward both call these, so the two routes produce bit-identical values.
namespace kernels {

// C = A[n,k] * B[k,m]
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A^T[k,n] * B[k,m]  (A stored as [k,n])
Tensor matmul_at(const Tensor& a, const Tensor& b);
// C = A[n,k] * B^T[m,k]  (B stored as [m,k])
Tensor matmul_bt(const Tensor& a, const Tensor& b);
// M[n,m] + b[m] broadcast over rows
Tensor add_row_broadcast(const Tensor& m, const Tensor& b);
// Column sums of M[n,m] -> [m]
Tensor column_sums(const Tensor& m);
Tensor relu(const Tensor& x);
// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& logits);

} // namespace kernels

} // namespace atnl
