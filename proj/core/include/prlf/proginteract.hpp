#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <span>

#include "prlf/amre.hpp"
#include "prlf/modality.hpp"
#include "prlf/rng.hpp"
#include "prlf/tape.hpp"

namespace prlf {

// f + Dropout(ReLU(f W1 + b1) W2 + b2), row-wise over tokens.
struct RefineWeights {
    Var w1, b1, w2, b2;
};

// Gate network (W1: 2D x D, b1, W2: D x D, b2) and denoiser (W_aux: D x D).
struct DecomposerWeights {
    Var w1, b1, w2, b2, w_aux;
};

// pooled: one gate per sample from pooled [dom; aux], broadcast over tokens.
// token:  one gate per token from the row-wise concatenation.
enum class GateMode { pooled, token };

struct InteractionConfig {
    std::size_t steps = 4;
    double gamma = 0.8;
    double refine_dropout = 0.1;
    double denoise_dropout = 0.1;
    GateMode gate = GateMode::pooled;
    bool cross_path = true;
};

// Indexed by modality. decomposer[m] is used when m is an auxiliary.
struct InteractionWeights {
    std::array<RefineWeights, 3> refine;
    std::array<DecomposerWeights, 3> decomposer;
};

struct Decomposition {
    Var gate;
    Var proj;
    Var res;
};

struct InteractionResult {
    std::array<Var, 3> features;  // final f_m indexed by modality
    Var phase_loss;               // summed over iterations, divided by steps
};

// Called once per auxiliary per iteration with the fused auxiliary input and its split.
using IterationObserver = std::function<void(std::size_t step, Modality aux, Var aux_input, const Decomposition&)>;

// `rng` null means evaluation mode: dropout is the identity.
Var self_refine(Var f, const RefineWeights& w, double dropout_rate, Rng* rng);

// softmax((mu_m f_m)(mu_n f_n)^T / sqrt(D)) (mu_m f_m); K x D.
Var cross_attend(Var f_m, Var f_n, double mu_m, double mu_n);

// Self-attention over the 2K stacked rows, reduced to K rows by averaging the halves.
Var fuse_cross(Var from_first, Var from_second);

// 1 - t / max(1, steps - 1).
double lambda_schedule(std::size_t t, std::size_t steps);

// lambda * self + (1 - lambda) * cross.
Var mix(Var self, Var cross, double lambda);

// Power-of-two grid 2^(e-50) with max|x| < 2^e over the given arrays. Values snapped to
// it add and subtract exactly as long as they stay below 2^e in magnitude.
double grid_quantum(std::span<const Var> arrays);

// gate from [dom; aux], proj = gate * dom, res = aux - proj. With quantum > 0 the
// projection is snapped to that grid, which makes proj + res == aux exact whenever aux
// already lies on it. quantum == 0 disables snapping.
Decomposition decompose(Var dom, Var aux, const DecomposerWeights& w, GateMode mode, double quantum);

// Mean over auxiliaries and tokens of <proj_k, res_k>^2 (one sample).
Var phase_loss(std::span<const Decomposition> parts);

// proj + gamma * (res - Dropout(ReLU(res W_aux))).
Var denoise_update(const Decomposition& d, double gamma, Var w_aux, double dropout_rate, Rng* rng);

// One shared set of weights is reused at every iteration. The lambda == 1 iteration
// skips the cross path since its weight is zero.
InteractionResult run_iterations(const std::array<Var, 3>& features, const ImportanceVector& importance,
                                 const InteractionWeights& weights, const InteractionConfig& config, Rng* rng,
                                 const IterationObserver* observer = nullptr);

}  // namespace prlf
