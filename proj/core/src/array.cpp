#include "prlf/array.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "prlf/error.hpp"

namespace prlf {

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

DenseArray::DenseArray(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(element_count(shape_), fill) {
    require(shape_.size() <= 2, "DenseArray: rank above 2 is not supported");
}

DenseArray::DenseArray(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require(shape_.size() <= 2, "DenseArray: rank above 2 is not supported");
    require(data_.size() == element_count(shape_), "DenseArray: data length does not match shape");
}

DenseArray DenseArray::matrix(std::size_t rows, std::size_t cols, double fill) {
    return DenseArray({rows, cols}, fill);
}

DenseArray DenseArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return DenseArray({rows, cols}, std::move(data));
}

DenseArray DenseArray::row(std::vector<double> values) {
    const std::size_t n = values.size();
    return DenseArray({1, n}, std::move(values));
}

DenseArray DenseArray::scalar(double value) { return DenseArray({1, 1}, std::vector<double>{value}); }

std::size_t DenseArray::rows() const noexcept { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t DenseArray::cols() const noexcept {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() == 1) return shape_[0];
    return 1;
}

bool DenseArray::same_shape(const DenseArray& other) const noexcept {
    return rows() == other.rows() && cols() == other.cols();
}

bool DenseArray::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void DenseArray::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

double DenseArray::sum() const noexcept { return std::accumulate(data_.begin(), data_.end(), 0.0); }

double DenseArray::squared_norm() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return s;
}

void DenseArray::check_finite(const char* where) const {
    if (!all_finite()) throw NumericError(std::string("non-finite value in ") + where);
}

std::string DenseArray::shape_string() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

}  // namespace prlf
