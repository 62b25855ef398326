#include "prlf/params.hpp"

#include <cmath>

#include "prlf/error.hpp"

namespace prlf {

std::size_t ParameterStore::add(std::string name, DenseArray initial) {
    require(!contains(name), "ParameterStore: duplicate parameter name " + name);
    initial.check_finite("ParameterStore::add");
    const std::size_t i = values_.size();
    lookup_.emplace(name, i);
    names_.push_back(std::move(name));
    values_.push_back(std::move(initial));
    return i;
}

std::size_t ParameterStore::index(std::string_view name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw ContractViolation("ParameterStore: unknown parameter " + std::string(name));
    return it->second;
}

bool ParameterStore::contains(std::string_view name) const { return lookup_.find(name) != lookup_.end(); }

std::size_t ParameterStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& v : values_) n += v.size();
    return n;
}

GradientBuffer::GradientBuffer(const ParameterStore& store) {
    grads_.reserve(store.count());
    for (std::size_t i = 0; i < store.count(); ++i) grads_.emplace_back(store.value(i).shape(), 0.0);
}

void GradientBuffer::zero() noexcept {
    for (auto& g : grads_) g.fill(0.0);
}

void GradientBuffer::add(const GradientBuffer& other, double weight) {
    require(other.grads_.size() == grads_.size(), "GradientBuffer::add: layout mismatch");
    for (std::size_t i = 0; i < grads_.size(); ++i) {
        auto dst = grads_[i].values();
        auto src = other.grads_[i].values();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += weight * src[j];
    }
}

void GradientBuffer::scale(double factor) noexcept {
    for (auto& g : grads_)
        for (double& v : g.values()) v *= factor;
}

double GradientBuffer::squared_norm() const noexcept {
    double s = 0.0;
    for (const auto& g : grads_) s += g.squared_norm();
    return s;
}

bool GradientBuffer::all_finite() const noexcept {
    for (const auto& g : grads_)
        if (!g.all_finite()) return false;
    return true;
}

DenseArray glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseArray w = DenseArray::matrix(fan_in, fan_out);
    for (double& v : w.values()) v = (2.0 * uniform01(rng) - 1.0) * a;
    return w;
}

}  // namespace prlf
