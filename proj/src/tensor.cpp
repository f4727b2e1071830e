#include "fame/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fame/error.hpp"

namespace fame {

namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {
    if (shape_.empty()) {
        throw Error(ErrorKind::shape, "tensor: empty shape");
    }
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty()) {
        throw Error(ErrorKind::shape, "tensor: empty shape");
    }
    if (product(shape_) != data_.size()) {
        throw Error(ErrorKind::shape, "tensor: shape/data size mismatch");
    }
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) {
        throw Error(ErrorKind::shape, "tensor: dim index out of range");
    }
    return shape_[i];
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw Error(ErrorKind::shape, "tensor: rows() needs rank 2");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw Error(ErrorKind::shape, "tensor: cols() needs rank 2");
    return shape_[1];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (product(new_shape) != data_.size()) {
        throw Error(ErrorKind::shape, "tensor: reshape element count mismatch");
    }
    return Tensor(std::move(new_shape), data_);
}

void Tensor::check_finite(const char* who) const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            throw Error(ErrorKind::numeric, std::string(who) + ": non-finite value");
        }
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw Error(ErrorKind::shape, "matmul: rank-2 operands required");
    }
    if (a.cols() != b.rows()) {
        throw Error(ErrorKind::shape, "matmul: inner dimension mismatch");
    }
    const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                out.at(i, j) += av * b.at(p, j);
            }
        }
    }
    out.check_finite("matmul");
    return out;
}

Tensor softmax_rows(const Tensor& m) {
    if (m.rank() != 2) throw Error(ErrorKind::shape, "softmax_rows: rank-2 input required");
    m.check_finite("softmax_rows");
    Tensor out({m.rows(), m.cols()});
    for (std::size_t r = 0; r < m.rows(); ++r) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < m.cols(); ++c) mx = std::max(mx, m.at(r, c));
        double sum = 0.0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            const double e = std::exp(m.at(r, c) - mx);
            out.at(r, c) = e;
            sum += e;
        }
        for (std::size_t c = 0; c < m.cols(); ++c) out.at(r, c) /= sum;
    }
    return out;
}

double l2_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
    if (u.size() != v.size()) {
        throw Error(ErrorKind::shape, "cosine: vector length mismatch");
    }
    const double nu = l2_norm(u), nv = l2_norm(v);
    // Degenerate vectors map to 0 rather than NaN.
    if (nu < 1e-12 || nv < 1e-12) return 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
    return std::clamp(dot / (nu * nv), -1.0, 1.0);
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw Error(ErrorKind::shape, "add: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw Error(ErrorKind::shape, "sub: shape mismatch");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Tensor transpose(const Tensor& m) {
    if (m.rank() != 2) throw Error(ErrorKind::shape, "transpose: rank-2 input required");
    Tensor out({m.cols(), m.rows()});
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) out.at(c, r) = m.at(r, c);
    return out;
}

Tensor identity(std::size_t n) {
    Tensor out({n, n});
    for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0;
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw Error(ErrorKind::shape, "max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace fame
