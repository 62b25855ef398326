#pragma once

#include <cstddef>
#include <span>

#include "prlf/rng.hpp"
#include "prlf/tape.hpp"

// Differentiable kernels. Every kernel validates shapes (ContractViolation) and
// rejects non-finite outputs (NumericError).
namespace prlf::ops {

inline constexpr double kNormEpsilon = 1e-12;
inline constexpr double kProbabilityFloor = 1e-30;

Var matmul(Var a, Var b);     // a [n x k] * b [k x m]
Var matmul_nt(Var a, Var b);  // a [n x k] * b^T, b [m x k]

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);           // elementwise
Var add_row(Var a, Var row);     // row [1 x m] broadcast over the rows of a
Var mul_row(Var a, Var row);
Var scale(Var a, double factor);

Var linear(Var x, Var weight, Var bias);  // x W + b
Var linear(Var x, Var weight);            // x W

// ReLU'(0) is taken as 0.
Var relu(Var a);
Var sigmoid(Var a);
Var softmax_rows(Var a);

// Inverted dropout: survivors are scaled by 1 / (1 - rate). rate == 0 returns `a` itself.
Var dropout(Var a, double rate, Rng& rng);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);

Var mean_rows(Var a);          // [n x m] -> [1 x m]
Var row_dot(Var a, Var b);     // [n x m], [n x m] -> [n x 1]
Var square(Var a);
Var sum_all(Var a);            // -> [1 x 1]
Var mean_all(Var a);           // -> [1 x 1]

// Row vector divided by its L1 norm; a norm below kNormEpsilon yields the uniform vector
// (constant, zero gradient).
Var l1_normalize(Var a);

// -log p[label] for a 1 x C probability row; p below kProbabilityFloor is clamped
// and counted on the tape.
Var cross_entropy(Var probabilities, std::size_t label);
// log p[label], same clamping.
Var log_prob(Var probabilities, std::size_t label);

// Rounds every entry to the nearest multiple of `quantum` (a power of two). The
// gradient passes straight through.
Var snap_to_grid(Var a, double quantum);

}  // namespace prlf::ops
