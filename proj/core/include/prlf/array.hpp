#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace prlf {

// Row-major dense array of doubles. Rank 0..2 is all the model needs; the tape treats
// everything as a rows x cols matrix (vectors are 1 x n).
class DenseArray {
public:
    DenseArray() = default;
    explicit DenseArray(std::vector<std::size_t> shape, double fill = 0.0);
    DenseArray(std::vector<std::size_t> shape, std::vector<double> data);

    static DenseArray matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static DenseArray matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static DenseArray row(std::vector<double> values);
    static DenseArray scalar(double value);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Matrix view: rank-1 arrays are one row, rank-0 arrays are 1 x 1.
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    std::span<const double> row_values(std::size_t r) const noexcept {
        return std::span<const double>(data_).subspan(r * cols(), cols());
    }
    std::vector<double>& storage() noexcept { return data_; }

    bool same_shape(const DenseArray& other) const noexcept;
    bool all_finite() const noexcept;
    void fill(double value) noexcept;
    double sum() const noexcept;
    double squared_norm() const noexcept;

    // Throws NumericError naming `where` if any entry is NaN/Inf.
    void check_finite(const char* where) const;

    std::string shape_string() const;

    friend bool operator==(const DenseArray&, const DenseArray&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace prlf
