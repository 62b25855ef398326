#include "prlf/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace prlf {

namespace {

double evaluate(const ScalarFunction& f, const DenseArray& point) {
    Tape tape;
    return f(tape, tape.constant(point)).item();
}

}  // namespace

GradCheckReport grad_check_report(const ScalarFunction& f, const DenseArray& point, double step) {
    Tape tape;
    Var x = tape.input(point);
    tape.backward(f(tape, x));
    const DenseArray analytic = tape.grad(x);

    GradCheckReport report;
    DenseArray probe = point;
    for (std::size_t i = 0; i < point.size(); ++i) {
        probe[i] = point[i] + step;
        const double up = evaluate(f, probe);
        probe[i] = point[i] - step;
        const double down = evaluate(f, probe);
        probe[i] = point[i];
        const double numeric = (up - down) / (2.0 * step);
        const double err =
            std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(analytic[i]) + std::abs(numeric));
        if (i == 0 || err > report.max_relative_error) report = {err, i, analytic[i], numeric};
    }
    return report;
}

double grad_check(const ScalarFunction& f, const DenseArray& point, double step) {
    return grad_check_report(f, point, step).max_relative_error;
}

}  // namespace prlf
