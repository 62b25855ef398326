#include "prlf/tape.hpp"

#include "prlf/error.hpp"

namespace prlf {

const DenseArray& Var::value() const {
    require(tape != nullptr, "Var: not bound to a tape");
    return tape->value(id);
}

double Var::item() const {
    const DenseArray& v = value();
    require(v.size() == 1, "Var::item: node is not 1 x 1");
    return v[0];
}

Var Tape::push(Node node) {
    require(nodes_.size() < UINT32_MAX, "Tape: node limit reached");
    require(!backward_done_, "Tape: recording after backward(); call reset() first");
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(DenseArray value) {
    value.check_finite("Tape::constant");
    Node n;
    n.value = std::move(value);
    return push(std::move(n));
}

Var Tape::input(DenseArray value) {
    value.check_finite("Tape::input");
    Node n;
    n.value = std::move(value);
    n.needs_grad = true;
    return push(std::move(n));
}

Var Tape::parameter(const ParameterStore& store, std::size_t index) {
    require(store_ == nullptr || store_ == &store, "Tape: parameters from two stores on one tape");
    require(index < store.count(), "Tape::parameter: index out of range");
    store_ = &store;
    if (auto it = param_nodes_.find(index); it != param_nodes_.end()) return Var{this, it->second};
    Node n;
    n.external = &store.value(index);
    n.needs_grad = true;
    n.param = static_cast<std::ptrdiff_t>(index);
    Var v = push(std::move(n));
    param_nodes_.emplace(index, v.id);
    return v;
}

Var Tape::record(DenseArray value, std::vector<std::uint32_t> inputs, BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    for (std::uint32_t in : inputs) {
        require(in < nodes_.size(), "Tape::record: dangling input");
        n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
    }
    n.inputs = std::move(inputs);
    if (n.needs_grad) n.backward = std::move(backward);
    return push(std::move(n));
}

const DenseArray& Tape::value(std::uint32_t id) const {
    require(id < nodes_.size(), "Tape::value: bad node id");
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.value;
}

DenseArray& Tape::grad_slot(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
        const DenseArray& v = n.external ? *n.external : n.value;
        n.grad = DenseArray(v.shape(), 0.0);
    }
    return n.grad;
}

DenseArray Tape::grad(Var v) const {
    require(v.id < nodes_.size(), "Tape::grad: bad node id");
    const Node& n = nodes_[v.id];
    if (!n.grad.empty()) return n.grad;
    return DenseArray(value(v.id).shape(), 0.0);
}

void Tape::backward(Var loss, GradientBuffer* sink) {
    require(loss.tape == this, "Tape::backward: loss belongs to another tape");
    require(!backward_done_, "Tape::backward: called twice without reset()");
    require(value(loss.id).size() == 1, "Tape::backward: loss must be 1 x 1");
    backward_done_ = true;
    if (!nodes_[loss.id].needs_grad) return;

    grad_slot(loss.id)[0] = 1.0;
    for (std::uint32_t id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (n.grad.empty()) continue;
        if (n.backward) n.backward(*this, id);
        if (n.param >= 0 && sink != nullptr) {
            DenseArray& dst = (*sink)[static_cast<std::size_t>(n.param)];
            require(dst.same_shape(n.grad), "Tape::backward: gradient sink layout mismatch");
            auto d = dst.values();
            auto g = n.grad.values();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
        }
    }
}

double Tape::parameter_gradient_squared_norm() const {
    double total = 0.0;
    for (const Node& n : nodes_)
        if (n.param >= 0 && !n.grad.empty()) total += n.grad.squared_norm();
    return total;
}

void Tape::reset() {
    nodes_.clear();
    param_nodes_.clear();
    store_ = nullptr;
    backward_done_ = false;
    clamps_ = 0;
}

}  // namespace prlf
