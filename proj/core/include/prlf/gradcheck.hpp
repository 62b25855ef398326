#pragma once

#include <cstddef>
#include <functional>

#include "prlf/array.hpp"
#include "prlf/tape.hpp"

namespace prlf {

// Builds a scalar (1 x 1) objective from a differentiable input placed on the tape.
using ScalarFunction = std::function<Var(Tape&, Var)>;

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;  // at worst_index
    double numeric = 0.0;
};

// Compares tape gradients with central differences. Relative error per coordinate is
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
GradCheckReport grad_check_report(const ScalarFunction& f, const DenseArray& point, double step = 1e-5);

double grad_check(const ScalarFunction& f, const DenseArray& point, double step = 1e-5);

}  // namespace prlf
