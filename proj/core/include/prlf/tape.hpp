#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "prlf/array.hpp"
#include "prlf/params.hpp"

namespace prlf {

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    const DenseArray& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    double item() const;  // value of a 1 x 1 node
};

// Reverse-mode tape. Nodes are appended in creation order, so the node list is a
// topological order and backward simply walks it in reverse.
//
// A tape is single-use: one backward() per recording. Call reset() to reuse the storage.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::uint32_t)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Leaf that never receives a gradient.
    Var constant(DenseArray value);
    // Leaf whose gradient is readable via grad() after backward().
    Var input(DenseArray value);
    // Leaf bound to a parameter slot; the store must outlive the tape. Repeated calls
    // with the same slot return the same node so shared weights accumulate correctly.
    Var parameter(const ParameterStore& store, std::size_t index);

    // Appends an op node. `backward` is dropped when no input needs a gradient.
    Var record(DenseArray value, std::vector<std::uint32_t> inputs, BackwardFn backward);

    const DenseArray& value(std::uint32_t id) const;
    const DenseArray& value(Var v) const { return value(v.id); }
    bool needs_grad(std::uint32_t id) const { return nodes_[id].needs_grad; }
    const std::vector<std::uint32_t>& inputs(std::uint32_t id) const { return nodes_[id].inputs; }

    // Incoming gradient of a node during backward.
    const DenseArray& out_grad(std::uint32_t id) const { return nodes_[id].grad; }
    // Gradient accumulator for an input, allocated as zeros on first touch.
    DenseArray& grad_slot(std::uint32_t id);

    // Gradient of a leaf after backward(); exact zeros if the leaf was unreachable.
    DenseArray grad(Var v) const;

    // Back-propagates from a 1 x 1 loss. Parameter gradients are added into `sink`.
    void backward(Var loss, GradientBuffer* sink = nullptr);

    // Sum of squared gradient entries over every parameter leaf on this tape.
    double parameter_gradient_squared_norm() const;

    bool backward_done() const noexcept { return backward_done_; }
    void reset();
    std::size_t size() const noexcept { return nodes_.size(); }

    // Diagnostics: number of cross-entropy probabilities clamped at 1e-30.
    void note_clamp() noexcept { ++clamps_; }
    std::size_t clamp_count() const noexcept { return clamps_; }

private:
    struct Node {
        DenseArray value;
        const DenseArray* external = nullptr;
        DenseArray grad;
        std::vector<std::uint32_t> inputs;
        BackwardFn backward;
        bool needs_grad = false;
        std::ptrdiff_t param = -1;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    std::unordered_map<std::size_t, std::uint32_t> param_nodes_;
    const ParameterStore* store_ = nullptr;
    bool backward_done_ = false;
    std::size_t clamps_ = 0;
};

}  // namespace prlf
