#include "prlf/proginteract.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "prlf/error.hpp"
#include "prlf/ops.hpp"

namespace prlf {

Var self_refine(Var f, const RefineWeights& w, double dropout_rate, Rng* rng) {
    Var branch = ops::linear(ops::relu(ops::linear(f, w.w1, w.b1)), w.w2, w.b2);
    if (rng != nullptr) branch = ops::dropout(branch, dropout_rate, *rng);
    return ops::add(f, branch);
}

Var cross_attend(Var f_m, Var f_n, double mu_m, double mu_n) {
    require(f_m.cols() == f_n.cols(), "cross_attend: feature widths differ");
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(f_m.cols()));
    Var values = ops::scale(f_m, mu_m);
    Var keys = ops::scale(f_n, mu_n);
    Var scores = ops::scale(ops::matmul_nt(values, keys), inv_sqrt_d);
    return ops::matmul(ops::softmax_rows(scores), values);
}

Var fuse_cross(Var from_first, Var from_second) {
    require(from_first.rows() == from_second.rows() && from_first.cols() == from_second.cols(),
            "fuse_cross: inputs must share a K x D shape");
    Tape& tape = *from_first.tape;
    const std::size_t k = from_first.rows();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(from_first.cols()));
    const std::array<Var, 2> parts{from_first, from_second};
    Var stacked = ops::concat_rows(parts);
    Var attention = ops::softmax_rows(ops::scale(ops::matmul_nt(stacked, stacked), inv_sqrt_d));
    Var attended = ops::matmul(attention, stacked);
    DenseArray halves = DenseArray::matrix(k, 2 * k);
    for (std::size_t r = 0; r < k; ++r) {
        halves(r, r) = 0.5;
        halves(r, k + r) = 0.5;
    }
    return ops::matmul(tape.constant(std::move(halves)), attended);
}

double lambda_schedule(std::size_t t, std::size_t steps) {
    require(steps >= 1, "lambda_schedule: steps must be >= 1");
    require(t < steps, "lambda_schedule: iteration index out of range");
    const std::size_t span = std::max<std::size_t>(1, steps - 1);
    return static_cast<double>(span - t) / static_cast<double>(span);
}

Var mix(Var self, Var cross, double lambda) {
    if (lambda == 1.0) return self;
    if (lambda == 0.0) return cross;
    return ops::add(ops::scale(self, lambda), ops::scale(cross, 1.0 - lambda));
}

double grid_quantum(std::span<const Var> arrays) {
    double largest = 0.0;
    for (const Var& v : arrays)
        for (double x : v.value().values()) largest = std::max(largest, std::abs(x));
    if (largest == 0.0) return 1.0;
    int exponent = 0;
    std::frexp(largest, &exponent);  // largest < 2^exponent
    return std::ldexp(1.0, exponent - 50);
}

Decomposition decompose(Var dom, Var aux, const DecomposerWeights& w, GateMode mode, double quantum) {
    require(dom.rows() == aux.rows() && dom.cols() == aux.cols(), "decompose: dominant and auxiliary shapes differ");
    Decomposition d;
    Var proj;
    if (mode == GateMode::pooled) {
        const std::array<Var, 2> joint{ops::mean_rows(dom), ops::mean_rows(aux)};
        Var hidden = ops::relu(ops::linear(ops::concat_cols(joint), w.w1, w.b1));
        d.gate = ops::sigmoid(ops::linear(hidden, w.w2, w.b2));
        proj = ops::mul_row(dom, d.gate);
    } else {
        const std::array<Var, 2> joint{dom, aux};
        Var hidden = ops::relu(ops::linear(ops::concat_cols(joint), w.w1, w.b1));
        d.gate = ops::sigmoid(ops::linear(hidden, w.w2, w.b2));
        proj = ops::mul(dom, d.gate);
    }
    d.proj = quantum > 0.0 ? ops::snap_to_grid(proj, quantum) : proj;
    d.res = ops::sub(aux, d.proj);
    return d;
}

Var phase_loss(std::span<const Decomposition> parts) {
    require(!parts.empty(), "phase_loss: no auxiliary decompositions");
    Var total;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        Var term = ops::mean_all(ops::square(ops::row_dot(parts[i].proj, parts[i].res)));
        total = i == 0 ? term : ops::add(total, term);
    }
    return ops::scale(total, 1.0 / static_cast<double>(parts.size()));
}

Var denoise_update(const Decomposition& d, double gamma, Var w_aux, double dropout_rate, Rng* rng) {
    require(gamma >= 0.0 && gamma <= 1.0, "denoise_update: gamma must lie in [0, 1]");
    Var noise = ops::relu(ops::matmul(d.res, w_aux));
    if (rng != nullptr) noise = ops::dropout(noise, dropout_rate, *rng);
    return ops::add(d.proj, ops::scale(ops::sub(d.res, noise), gamma));
}

InteractionResult run_iterations(const std::array<Var, 3>& features, const ImportanceVector& importance,
                                 const InteractionWeights& weights, const InteractionConfig& config, Rng* rng,
                                 const IterationObserver* observer) {
    require(config.steps >= 1, "run_iterations: steps must be >= 1");
    std::array<Var, 3> current = features;
    Var phase_total;
    const std::size_t dom = index_of(importance.dominant);

    for (std::size_t t = 0; t < config.steps; ++t) {
        std::array<Var, 3> refined;
        for (Modality m : kModalities)
            refined[index_of(m)] =
                self_refine(current[index_of(m)], weights.refine[index_of(m)], config.refine_dropout, rng);

        const double lambda = lambda_schedule(t, config.steps);
        std::array<Var, 3> fused;
        for (Modality m : kModalities) {
            const std::size_t mi = index_of(m);
            if (lambda == 1.0) {
                fused[mi] = refined[mi];
                continue;
            }
            if (!config.cross_path) {
                fused[mi] = ops::scale(refined[mi], lambda);
                continue;
            }
            std::array<Var, 2> directed;
            std::size_t k = 0;
            for (Modality n : kModalities) {
                if (n == m) continue;
                directed[k++] =
                    cross_attend(refined[mi], refined[index_of(n)], importance.mu[mi], importance.mu[index_of(n)]);
            }
            fused[mi] = mix(refined[mi], fuse_cross(directed[0], directed[1]), lambda);
        }

        const double quantum = grid_quantum(fused);
        for (Var& f : fused) f = ops::snap_to_grid(f, quantum);

        std::array<Decomposition, 2> parts;
        for (std::size_t a = 0; a < 2; ++a) {
            const std::size_t ai = index_of(importance.aux[a]);
            const DecomposerWeights& dw = weights.decomposer[ai];
            parts[a] = decompose(fused[dom], fused[ai], dw, config.gate, quantum);
            if (observer != nullptr && *observer) (*observer)(t, importance.aux[a], fused[ai], parts[a]);
            current[ai] = denoise_update(parts[a], config.gamma, dw.w_aux, config.denoise_dropout, rng);
        }
        current[dom] = fused[dom];

        Var step_loss = phase_loss(parts);
        phase_total = t == 0 ? step_loss : ops::add(phase_total, step_loss);
    }
    return InteractionResult{current, ops::scale(phase_total, 1.0 / static_cast<double>(config.steps))};
}

}  // namespace prlf
