#include "atnl/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "atnl/parallel.hpp"

namespace atnl {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t s : shape) {
        if (s == 0) throw std::invalid_argument("Tensor: zero extent in shape");
        p *= s;
    }
    return p;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw std::invalid_argument("Tensor: shape/data length mismatch");
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::row_vector(std::vector<double> data) {
    std::size_t n = data.size();
    return Tensor({1, n}, std::move(data));
}

std::size_t Tensor::rows() const {
    return rank() >= 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const {
    if (rank() == 0) return 0;
    return shape_.back();
}

std::span<const double> Tensor::row(std::size_t i) const {
    std::size_t c = cols();
    return std::span<const double>(data_).subspan(i * c, c);
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

namespace kernels {

namespace {

void require_2d(const Tensor& t, const char* who) {
    if (t.rank() != 2) {
        throw std::invalid_argument(std::string(who) + ": expected rank-2 tensor, got " + t.shape_str());
    }
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul lhs");
    require_2d(b, "matmul rhs");
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    if (b.rows() != k) {
        throw std::invalid_argument("matmul: inner dimensions " + a.shape_str() + " x " + b.shape_str());
    }
    Tensor c({n, m});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* cp = c.data().data();
    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            double* crow = cp + i * m;
            for (std::size_t l = 0; l < k; ++l) {
                const double av = ap[i * k + l];
                const double* brow = bp + l * m;
                for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
            }
        }
    }, 8);
    return c;
}

Tensor matmul_at(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_at lhs");
    require_2d(b, "matmul_at rhs");
    const std::size_t k = a.rows(), n = a.cols(), m = b.cols();
    if (b.rows() != k) {
        throw std::invalid_argument("matmul_at: inner dimensions " + a.shape_str() + " x " + b.shape_str());
    }
    Tensor c({n, m});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* cp = c.data().data();
    // Partitioned over output rows i; the sum over l stays in ascending
    // order per element, so the result is independent of the partition.
    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t l = 0; l < k; ++l) {
            const double* arow = ap + l * n;
            const double* brow = bp + l * m;
            for (std::size_t i = i0; i < i1; ++i) {
                const double av = arow[i];
                double* crow = cp + i * m;
                for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
            }
        }
    }, 8);
    return c;
}

Tensor matmul_bt(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul_bt lhs");
    require_2d(b, "matmul_bt rhs");
    const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
    if (b.cols() != k) {
        throw std::invalid_argument("matmul_bt: inner dimensions " + a.shape_str() + " x " + b.shape_str());
    }
    Tensor c({n, m});
    const double* ap = a.data().data();
    const double* bp = b.data().data();
    double* cp = c.data().data();
    parallel_for(n, [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i) {
            const double* arow = ap + i * k;
            double* crow = cp + i * m;
            for (std::size_t j = 0; j < m; ++j) {
                const double* brow = bp + j * k;
                // Four independent accumulators; fixed summation order.
                double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                std::size_t l = 0;
                for (; l + 4 <= k; l += 4) {
                    s0 += arow[l] * brow[l];
                    s1 += arow[l + 1] * brow[l + 1];
                    s2 += arow[l + 2] * brow[l + 2];
                    s3 += arow[l + 3] * brow[l + 3];
                }
                double s = (s0 + s1) + (s2 + s3);
                for (; l < k; ++l) s += arow[l] * brow[l];
                crow[j] = s;
            }
        }
    }, 8);
    return c;
}

Tensor add_row_broadcast(const Tensor& m, const Tensor& b) {
    require_2d(m, "add_row_broadcast lhs");
    if (b.size() != m.cols()) {
        throw std::invalid_argument("add_row_broadcast: bias length " + b.shape_str() +
                                    " vs matrix " + m.shape_str());
    }
    Tensor out = m;
    const double* bp = b.data().data();
    double* op = out.data().data();
    const std::size_t rows = m.rows(), cols = m.cols();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = op + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += bp[j];
    }
    return out;
}

Tensor column_sums(const Tensor& m) {
    require_2d(m, "column_sums");
    Tensor out({m.cols()});
    const std::size_t rows = m.rows(), cols = m.cols();
    const double* mp = m.data().data();
    double* op = out.data().data();
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = mp + i * cols;
        for (std::size_t j = 0; j < cols; ++j) op[j] += row[j];
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    require_2d(logits, "softmax_rows");
    Tensor out = logits;
    const std::size_t rows = logits.rows(), cols = logits.cols();
    double* op = out.data().data();
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = op + i * cols;
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
    }
    return out;
}

} // namespace kernels

} // namespace atnl
