#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "prlf/array.hpp"
#include "prlf/rng.hpp"

namespace prlf {

// Flat, ordered, named collection of trainable arrays. Order of insertion is the
// serialization order and the reduction order everywhere.
class ParameterStore {
public:
    std::size_t add(std::string name, DenseArray initial);

    std::size_t index(std::string_view name) const;
    bool contains(std::string_view name) const;

    const DenseArray& value(std::size_t i) const { return values_.at(i); }
    DenseArray& value(std::size_t i) { return values_.at(i); }
    const DenseArray& value(std::string_view name) const { return values_.at(index(name)); }
    DenseArray& value(std::string_view name) { return values_.at(index(name)); }
    const std::string& name(std::size_t i) const { return names_.at(i); }

    std::size_t count() const noexcept { return values_.size(); }
    std::size_t scalar_count() const noexcept;

    friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
        return a.names_ == b.names_ && a.values_ == b.values_;
    }

private:
    std::vector<std::string> names_;
    std::vector<DenseArray> values_;
    std::map<std::string, std::size_t, std::less<>> lookup_;
};

// Gradient accumulators shaped like a ParameterStore.
class GradientBuffer {
public:
    GradientBuffer() = default;
    explicit GradientBuffer(const ParameterStore& store);

    DenseArray& operator[](std::size_t i) { return grads_.at(i); }
    const DenseArray& operator[](std::size_t i) const { return grads_.at(i); }
    std::size_t count() const noexcept { return grads_.size(); }

    void zero() noexcept;
    void add(const GradientBuffer& other, double weight = 1.0);
    void scale(double factor) noexcept;
    double squared_norm() const noexcept;
    bool all_finite() const noexcept;

private:
    std::vector<DenseArray> grads_;
};

// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
DenseArray glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace prlf
