#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "prlf/amre.hpp"
#include "prlf/dataset.hpp"
#include "prlf/encoder.hpp"
#include "prlf/params.hpp"
#include "prlf/proginteract.hpp"
#include "prlf/tape.hpp"

namespace prlf {

// Scalar whose parameter gradient defines the Fisher trace of a branch: the log-likelihood
// log p(c | X_m), or the head's raw output (logit) for class c.
enum class FisherTarget { log_likelihood, logit };

struct ModelConfig {
    DatasetShape shape;          // input frames/dims per modality and class count
    std::size_t tokens = 8;      // K
    std::size_t width = 64;      // D
    InteractionConfig interaction;
    RoutingMode routing = RoutingMode::full;
    FusionMode fusion = FusionMode::elementwise;
    bool shared_decomposer = false;
    FisherTarget fisher_target = FisherTarget::logit;
};

void validate(const ModelConfig& config);

// What the router needs besides the features: the label (training only), the Fisher
// traces used for beta and the dynamic weight w.
struct RoutingInputs {
    std::optional<std::size_t> label;
    Triple traces{};
    Triple w{};
};

struct ForwardResult {
    std::array<TokenFeature, 3> encoded;
    std::array<Var, 3> head_probabilities;
    Triple alpha{};
    ImportanceVector importance;
    Var fused;          // [pool(f_dom), pool(f_aux1), pool(f_aux2)], 1 x 3D
    Var probabilities;  // 1 x C
    Var phase_loss;
    Var task_loss;      // only with a label
    Var uni_loss;       // only with a label
};

class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);
    Model(ModelConfig config, ParameterStore params);

    const ModelConfig& config() const noexcept { return config_; }
    const ParameterStore& params() const noexcept { return params_; }
    ParameterStore& params() noexcept { return params_; }

    // Throws ContractViolation when the sample does not match the configured shape.
    void check_sample(const SampleRecord& sample) const;

    TokenFeature encode(Tape& tape, const SampleRecord& sample, Modality m) const;
    // head_m(pool(f_m)), 1 x C.
    Var head_logits(Tape& tape, const TokenFeature& feature) const;
    // softmax of head_logits.
    Var head_probabilities(Tape& tape, const TokenFeature& feature) const;

    // `rng` null means evaluation mode (no dropout).
    ForwardResult forward(Tape& tape, const SampleRecord& sample, const RoutingInputs& routing, Rng* rng,
                          const IterationObserver* observer = nullptr) const;

    // ||grad s_c(X_m)||^2 over the encoder and head of modality m, where s_c is the configured
    // Fisher target, c is `label` when given and the head's predicted class otherwise.
    // 0 for an absent modality.
    double fisher_trace(const SampleRecord& sample, Modality m, std::optional<std::size_t> label) const;
    Triple fisher_traces(const SampleRecord& sample, std::optional<std::size_t> label) const;

    // Parameter slots that belong to the unimodal branch of m (encoder + head).
    std::vector<std::size_t> branch_parameters(Modality m) const;

private:
    void build_layout(std::uint64_t seed);
    InteractionWeights interaction_weights(Tape& tape) const;

    ModelConfig config_;
    ParameterStore params_;
};

struct Prediction {
    std::vector<double> probabilities;
    std::size_t predicted_class = 0;
    ImportanceVector importance;
    Triple traces{};
    std::vector<double> fused;
};

// Inference path: no dropout, traces from the heads' own predictions, w frozen.
Prediction predict(const Model& model, const SampleRecord& sample, const Triple& frozen_w,
                   const IterationObserver* observer = nullptr);

}  // namespace prlf
