#pragma once

#include <cstddef>
#include <vector>

namespace fame {

// Dense row-major tensor of binary64 values. All public operations keep
// values finite; non-finite results are rejected with a numeric error.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const;

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    // Rank-2 conveniences.
    std::size_t rows() const;
    std::size_t cols() const;
    double at(std::size_t r, std::size_t c) const;
    double& at(std::size_t r, std::size_t c);

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    Tensor reshaped(std::vector<std::size_t> new_shape) const;

    void check_finite(const char* who) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& m);
double cosine(const std::vector<double>& u, const std::vector<double>& v);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor transpose(const Tensor& m);
Tensor identity(std::size_t n);

double l2_norm(const std::vector<double>& v);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace fame
