#include "prlf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eigen_view.hpp"
#include "prlf/error.hpp"

namespace prlf::ops {

using detail::view;

namespace {

Tape& tape_of(Var a) {
    require(a.tape != nullptr, "ops: Var not bound to a tape");
    return *a.tape;
}

Tape& tape_of(Var a, Var b) {
    require(a.tape != nullptr && a.tape == b.tape, "ops: operands live on different tapes");
    return *a.tape;
}

Var emit(Tape& t, DenseArray out, std::vector<std::uint32_t> inputs, Tape::BackwardFn fn, const char* op) {
    out.check_finite(op);
    return t.record(std::move(out), std::move(inputs), std::move(fn));
}

void require_same_shape(const DenseArray& a, const DenseArray& b, const char* op) {
    if (!a.same_shape(b))
        throw ContractViolation(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
}

void require_row_of(const DenseArray& a, const DenseArray& row, const char* op) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw ContractViolation(std::string(op) + ": expected a 1 x " + std::to_string(a.cols()) + " row, got " +
                                row.shape_string());
}

DenseArray same_shape_zeros(const DenseArray& a) { return DenseArray::matrix(a.rows(), a.cols()); }

// Elementwise unary op with derivative expressed through (input, output).
template <class Forward, class Derivative>
Var unary(Var a, const char* op, Forward f, Derivative d) {
    Tape& t = tape_of(a);
    const DenseArray& x = a.value();
    DenseArray out = same_shape_zeros(x);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
    return emit(
        t, std::move(out), {a.id},
        [d](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            const DenseArray& g = t.out_grad(self);
            const DenseArray& x = t.value(in);
            const DenseArray& y = t.value(self);
            DenseArray& gx = t.grad_slot(in);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(x[i], y[i]);
        },
        op);
}

}  // namespace

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const DenseArray& A = a.value();
    const DenseArray& B = b.value();
    if (A.cols() != B.rows())
        throw ContractViolation("matmul: inner dimensions differ " + A.shape_string() + " * " + B.shape_string());
    DenseArray out = DenseArray::matrix(A.rows(), B.cols());
    view(out).noalias() = view(A) * view(B);
    return emit(
        t, std::move(out), {a.id, b.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
            const DenseArray& g = t.out_grad(self);
            if (t.needs_grad(ia)) view(t.grad_slot(ia)).noalias() += view(g) * view(t.value(ib)).transpose();
            if (t.needs_grad(ib)) view(t.grad_slot(ib)).noalias() += view(t.value(ia)).transpose() * view(g);
        },
        "matmul");
}

Var matmul_nt(Var a, Var b) {
    Tape& t = tape_of(a, b);
    const DenseArray& A = a.value();
    const DenseArray& B = b.value();
    if (A.cols() != B.cols())
        throw ContractViolation("matmul_nt: inner dimensions differ " + A.shape_string() + " * " + B.shape_string() +
                                "^T");
    DenseArray out = DenseArray::matrix(A.rows(), B.rows());
    view(out).noalias() = view(A) * view(B).transpose();
    return emit(
        t, std::move(out), {a.id, b.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
            const DenseArray& g = t.out_grad(self);
            if (t.needs_grad(ia)) view(t.grad_slot(ia)).noalias() += view(g) * view(t.value(ib));
            if (t.needs_grad(ib)) view(t.grad_slot(ib)).noalias() += view(g).transpose() * view(t.value(ia));
        },
        "matmul_nt");
}

Var add(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "add");
    DenseArray out = a.value();
    view(out) += view(b.value());
    return emit(
        t, std::move(out), {a.id, b.id},
        [](Tape& t, std::uint32_t self) {
            const DenseArray& g = t.out_grad(self);
            for (std::uint32_t in : t.inputs(self))
                if (t.needs_grad(in)) view(t.grad_slot(in)) += view(g);
        },
        "add");
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "sub");
    DenseArray out = a.value();
    view(out) -= view(b.value());
    return emit(
        t, std::move(out), {a.id, b.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
            const DenseArray& g = t.out_grad(self);
            if (t.needs_grad(ia)) view(t.grad_slot(ia)) += view(g);
            if (t.needs_grad(ib)) view(t.grad_slot(ib)) -= view(g);
        },
        "sub");
}

Var mul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "mul");
    DenseArray out = a.value();
    view(out).array() *= view(b.value()).array();
    return emit(
        t, std::move(out), {a.id, b.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
            const DenseArray& g = t.out_grad(self);
            if (t.needs_grad(ia)) view(t.grad_slot(ia)).array() += view(g).array() * view(t.value(ib)).array();
            if (t.needs_grad(ib)) view(t.grad_slot(ib)).array() += view(g).array() * view(t.value(ia)).array();
        },
        "mul");
}

Var add_row(Var a, Var row) {
    Tape& t = tape_of(a, row);
    require_row_of(a.value(), row.value(), "add_row");
    DenseArray out = a.value();
    view(out).rowwise() += view(row.value()).row(0);
    return emit(
        t, std::move(out), {a.id, row.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ir = t.inputs(self)[1];
            const DenseArray& g = t.out_grad(self);
            if (t.needs_grad(ia)) view(t.grad_slot(ia)) += view(g);
            if (t.needs_grad(ir)) view(t.grad_slot(ir)).row(0) += view(g).colwise().sum();
        },
        "add_row");
}

Var mul_row(Var a, Var row) {
    Tape& t = tape_of(a, row);
    require_row_of(a.value(), row.value(), "mul_row");
    DenseArray out = a.value();
    view(out).array().rowwise() *= view(row.value()).array().row(0);
    return emit(
        t, std::move(out), {a.id, row.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ir = t.inputs(self)[1];
            const DenseArray& g = t.out_grad(self);
            if (t.needs_grad(ia))
                view(t.grad_slot(ia)).array() += view(g).array().rowwise() * view(t.value(ir)).array().row(0);
            if (t.needs_grad(ir))
                view(t.grad_slot(ir)).row(0) += (view(g).array() * view(t.value(ia)).array()).matrix().colwise().sum();
        },
        "mul_row");
}

Var scale(Var a, double factor) {
    Tape& t = tape_of(a);
    DenseArray out = a.value();
    view(out) *= factor;
    return emit(
        t, std::move(out), {a.id},
        [factor](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            view(t.grad_slot(in)) += factor * view(t.out_grad(self));
        },
        "scale");
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var linear(Var x, Var weight) { return matmul(x, weight); }

Var relu(Var a) {
    return unary(
        a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
    return unary(
        a, "sigmoid",
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Var softmax_rows(Var a) {
    Tape& t = tape_of(a);
    const DenseArray& x = a.value();
    DenseArray out = same_shape_zeros(x);
    const std::size_t n = x.rows(), m = x.cols();
    require(m > 0, "softmax_rows: empty rows");
    for (std::size_t r = 0; r < n; ++r) {
        double mx = x(r, 0);
        for (std::size_t c = 1; c < m; ++c) mx = std::max(mx, x(r, c));
        double z = 0.0;
        for (std::size_t c = 0; c < m; ++c) z += (out(r, c) = std::exp(x(r, c) - mx));
        for (std::size_t c = 0; c < m; ++c) out(r, c) /= z;
    }
    return emit(
        t, std::move(out), {a.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            const DenseArray& g = t.out_grad(self);
            const DenseArray& y = t.value(self);
            DenseArray& gx = t.grad_slot(in);
            for (std::size_t r = 0; r < y.rows(); ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - dot);
            }
        },
        "softmax_rows");
}

Var dropout(Var a, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must lie in [0, 1)");
    if (rate == 0.0) return a;
    Tape& t = tape_of(a);
    const DenseArray& x = a.value();
    DenseArray mask = same_shape_zeros(x);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& v : mask.values()) v = uniform01(rng) >= rate ? keep_scale : 0.0;
    DenseArray out = x;
    view(out).array() *= view(mask).array();
    return emit(
        t, std::move(out), {a.id},
        [mask = std::move(mask)](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            view(t.grad_slot(in)).array() += view(t.out_grad(self)).array() * view(mask).array();
        },
        "dropout");
}

Var concat_rows(std::span<const Var> parts) {
    require(!parts.empty(), "concat_rows: no inputs");
    Tape& t = tape_of(parts[0]);
    const std::size_t m = parts[0].cols();
    std::size_t n = 0;
    std::vector<std::uint32_t> ids;
    for (const Var& p : parts) {
        tape_of(parts[0], p);
        require(p.cols() == m, "concat_rows: column counts differ");
        n += p.rows();
        ids.push_back(p.id);
    }
    DenseArray out = DenseArray::matrix(n, m);
    std::size_t offset = 0;
    for (const Var& p : parts) {
        const auto src = p.value().values();
        std::copy(src.begin(), src.end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset));
        offset += src.size();
    }
    return emit(
        t, std::move(out), std::move(ids),
        [](Tape& t, std::uint32_t self) {
            const DenseArray& g = t.out_grad(self);
            std::size_t offset = 0;
            for (std::uint32_t in : t.inputs(self)) {
                const std::size_t len = t.value(in).size();
                if (t.needs_grad(in)) {
                    DenseArray& gi = t.grad_slot(in);
                    for (std::size_t i = 0; i < len; ++i) gi[i] += g[offset + i];
                }
                offset += len;
            }
        },
        "concat_rows");
}

Var concat_cols(std::span<const Var> parts) {
    require(!parts.empty(), "concat_cols: no inputs");
    Tape& t = tape_of(parts[0]);
    const std::size_t n = parts[0].rows();
    std::size_t m = 0;
    std::vector<std::uint32_t> ids;
    for (const Var& p : parts) {
        tape_of(parts[0], p);
        require(p.rows() == n, "concat_cols: row counts differ");
        m += p.cols();
        ids.push_back(p.id);
    }
    DenseArray out = DenseArray::matrix(n, m);
    std::size_t col = 0;
    for (const Var& p : parts) {
        const DenseArray& v = p.value();
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < v.cols(); ++c) out(r, col + c) = v(r, c);
        col += v.cols();
    }
    return emit(
        t, std::move(out), std::move(ids),
        [](Tape& t, std::uint32_t self) {
            const DenseArray& g = t.out_grad(self);
            std::size_t col = 0;
            for (std::uint32_t in : t.inputs(self)) {
                const std::size_t w = t.value(in).cols();
                if (t.needs_grad(in)) {
                    DenseArray& gi = t.grad_slot(in);
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < w; ++c) gi(r, c) += g(r, col + c);
                }
                col += w;
            }
        },
        "concat_cols");
}

Var mean_rows(Var a) {
    Tape& t = tape_of(a);
    const DenseArray& x = a.value();
    require(x.rows() > 0, "mean_rows: no rows");
    DenseArray out = DenseArray::matrix(1, x.cols());
    view(out).row(0) = view(x).colwise().mean();
    return emit(
        t, std::move(out), {a.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            DenseArray& gx = t.grad_slot(in);
            const double inv = 1.0 / static_cast<double>(gx.rows());
            view(gx).rowwise() += inv * view(t.out_grad(self)).row(0);
        },
        "mean_rows");
}

Var row_dot(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a.value(), b.value(), "row_dot");
    DenseArray out = DenseArray::matrix(a.rows(), 1);
    view(out).col(0) = (view(a.value()).array() * view(b.value()).array()).matrix().rowwise().sum();
    return emit(
        t, std::move(out), {a.id, b.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t ia = t.inputs(self)[0], ib = t.inputs(self)[1];
            const auto g = view(t.out_grad(self)).col(0);
            if (t.needs_grad(ia)) view(t.grad_slot(ia)) += g.asDiagonal() * view(t.value(ib));
            if (t.needs_grad(ib)) view(t.grad_slot(ib)) += g.asDiagonal() * view(t.value(ia));
        },
        "row_dot");
}

Var square(Var a) {
    return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum_all(Var a) {
    Tape& t = tape_of(a);
    return emit(
        t, DenseArray::scalar(a.value().sum()), {a.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            const double g = t.out_grad(self)[0];
            for (double& v : t.grad_slot(in).values()) v += g;
        },
        "sum_all");
}

Var mean_all(Var a) {
    const std::size_t n = a.value().size();
    require(n > 0, "mean_all: empty array");
    return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var l1_normalize(Var a) {
    Tape& t = tape_of(a);
    const DenseArray& x = a.value();
    require(x.size() > 0, "l1_normalize: empty input");
    double norm = 0.0;
    for (double v : x.values()) norm += std::abs(v);
    DenseArray out = same_shape_zeros(x);
    if (norm < kNormEpsilon) {
        out.fill(1.0 / static_cast<double>(x.size()));
        return emit(t, std::move(out), {}, nullptr, "l1_normalize");
    }
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / norm;
    return emit(
        t, std::move(out), {a.id},
        [norm](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            const DenseArray& g = t.out_grad(self);
            const DenseArray& x = t.value(in);
            double gx_dot = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) gx_dot += g[i] * x[i];
            DenseArray& gi = t.grad_slot(in);
            for (std::size_t j = 0; j < x.size(); ++j) {
                const double sign = x[j] > 0.0 ? 1.0 : (x[j] < 0.0 ? -1.0 : 0.0);
                gi[j] += g[j] / norm - sign * gx_dot / (norm * norm);
            }
        },
        "l1_normalize");
}

namespace {

Var picked_log(Var probabilities, std::size_t label, double sign, const char* op) {
    Tape& t = tape_of(probabilities);
    const DenseArray& p = probabilities.value();
    require(p.rows() == 1, std::string(op) + ": expected a single probability row");
    require(label < p.cols(), std::string(op) + ": label out of range");
    double pl = p[label];
    const bool clamped = pl < kProbabilityFloor;
    if (clamped) {
        pl = kProbabilityFloor;
        t.note_clamp();
    }
    return emit(
        t, DenseArray::scalar(sign * std::log(pl)), {probabilities.id},
        [label, sign, pl, clamped](Tape& t, std::uint32_t self) {
            if (clamped) return;
            const std::uint32_t in = t.inputs(self)[0];
            t.grad_slot(in)[label] += t.out_grad(self)[0] * sign / pl;
        },
        op);
}

}  // namespace

Var cross_entropy(Var probabilities, std::size_t label) {
    return picked_log(probabilities, label, -1.0, "cross_entropy");
}

Var log_prob(Var probabilities, std::size_t label) { return picked_log(probabilities, label, 1.0, "log_prob"); }

Var snap_to_grid(Var a, double quantum) {
    int exponent = 0;
    require(quantum > 0.0 && std::frexp(quantum, &exponent) == 0.5, "snap_to_grid: quantum must be a power of two");
    Tape& t = tape_of(a);
    DenseArray out = a.value();
    for (double& v : out.values()) v = std::nearbyint(v / quantum) * quantum;
    return emit(
        t, std::move(out), {a.id},
        [](Tape& t, std::uint32_t self) {
            const std::uint32_t in = t.inputs(self)[0];
            view(t.grad_slot(in)) += view(t.out_grad(self));
        },
        "snap_to_grid");
}

}  // namespace prlf::ops
