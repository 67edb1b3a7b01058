#include "alrl/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "alrl/errors.hpp"

namespace alrl::nn {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {
    for (auto d : shape_) {
        if (d == 0) throw ConfigError("tensor dimensions must be positive, got " + shape_str(shape_));
    }
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    if (shape_size(shape_) != data_.size()) {
        throw ConfigError("shape " + shape_str(shape_) + " does not match " + std::to_string(data_.size()) +
                          " values");
    }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
    return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::row_size() const {
    if (shape_.empty()) return 0;
    return data_.size() / shape_[0];
}

std::span<double> Tensor::row(std::size_t i) {
    const auto n = row_size();
    return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const {
    const auto n = row_size();
    return std::span<const double>(data_).subspan(i * n, n);
}

void Tensor::reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
        throw ConfigError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    shape_ = std::move(shape);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace alrl::nn
