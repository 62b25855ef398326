#include "prlf/model.hpp"

#include <algorithm>
#include <string>

#include "prlf/error.hpp"
#include "prlf/ops.hpp"

namespace prlf {

namespace {

std::string key(const char* group, Modality m, const char* leaf) {
    return std::string(group) + "." + tag(m) + "." + leaf;
}

std::string decomposer_key(const ModelConfig& c, Modality m, const char* leaf) {
    if (c.shared_decomposer && std::string(leaf) != "w_aux") return std::string("decomposer.shared.") + leaf;
    return key("decomposer", m, leaf);
}

std::size_t argmax(std::span<const double> v) {
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace

void validate(const ModelConfig& c) {
    require(c.tokens >= 1 && c.width >= 1, "ModelConfig: tokens and width must be positive");
    require(c.shape.classes >= 2, "ModelConfig: need at least two classes");
    require(c.interaction.steps >= 1, "ModelConfig: steps must be >= 1");
    require(c.interaction.gamma >= 0.0 && c.interaction.gamma <= 1.0, "ModelConfig: gamma must lie in [0, 1]");
    require(c.interaction.refine_dropout >= 0.0 && c.interaction.refine_dropout < 1.0,
            "ModelConfig: refine dropout must lie in [0, 1)");
    require(c.interaction.denoise_dropout >= 0.0 && c.interaction.denoise_dropout < 1.0,
            "ModelConfig: denoise dropout must lie in [0, 1)");
    for (std::size_t m = 0; m < 3; ++m)
        require(c.shape.frames[m] >= 1 && c.shape.dims[m] >= 1, "ModelConfig: empty modality shape");
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    validate(config_);
    build_layout(seed);
}

Model::Model(ModelConfig config, ParameterStore params) : config_(std::move(config)) {
    validate(config_);
    build_layout(0);
    require(params.count() == params_.count(), "Model: parameter count does not match the configuration");
    for (std::size_t i = 0; i < params_.count(); ++i) {
        require(params.name(i) == params_.name(i), "Model: unexpected parameter " + params.name(i));
        require(params.value(i).shape() == params_.value(i).shape(), "Model: shape mismatch for " + params.name(i));
    }
    params_ = std::move(params);
}

void Model::build_layout(std::uint64_t seed) {
    Rng rng(derive_seed(seed, {stream(Stream::init)}));
    const std::size_t d = config_.width, c = config_.shape.classes;
    for (Modality m : kModalities) {
        params_.add(key("encoder", m, "proj"), glorot_uniform(config_.shape.dims[index_of(m)], d, rng));
        params_.add(key("head", m, "weight"), glorot_uniform(d, c, rng));
        params_.add(key("head", m, "bias"), DenseArray::matrix(1, c));
    }
    for (Modality m : kModalities) {
        params_.add(key("refine", m, "w1"), glorot_uniform(d, d, rng));
        params_.add(key("refine", m, "b1"), DenseArray::matrix(1, d));
        params_.add(key("refine", m, "w2"), glorot_uniform(d, d, rng));
        params_.add(key("refine", m, "b2"), DenseArray::matrix(1, d));
    }
    for (Modality m : kModalities) {
        if (!params_.contains(decomposer_key(config_, m, "w1"))) {
            params_.add(decomposer_key(config_, m, "w1"), glorot_uniform(2 * d, d, rng));
            params_.add(decomposer_key(config_, m, "b1"), DenseArray::matrix(1, d));
            params_.add(decomposer_key(config_, m, "w2"), glorot_uniform(d, d, rng));
            params_.add(decomposer_key(config_, m, "b2"), DenseArray::matrix(1, d));
        }
        params_.add(decomposer_key(config_, m, "w_aux"), glorot_uniform(d, d, rng));
    }
    params_.add("classifier.weight", glorot_uniform(3 * d, c, rng));
    params_.add("classifier.bias", DenseArray::matrix(1, c));
}

void Model::check_sample(const SampleRecord& sample) const {
    for (Modality m : kModalities) {
        const ModalitySequence& seq = sample[m];
        const std::size_t mi = index_of(m);
        if (seq.length() != config_.shape.frames[mi] || seq.dim() != config_.shape.dims[mi] ||
            seq.mask.size() != seq.length())
            throw ContractViolation(std::string("sample ") + std::to_string(sample.id) + ": modality '" + tag(m) +
                                    "' has shape " + seq.frames.shape_string() + ", expected [" +
                                    std::to_string(config_.shape.frames[mi]) + "x" +
                                    std::to_string(config_.shape.dims[mi]) + "]");
    }
    require(sample.label < config_.shape.classes, "sample label outside the configured classes");
}

TokenFeature Model::encode(Tape& tape, const SampleRecord& sample, Modality m) const {
    Var proj = tape.parameter(params_, params_.index(key("encoder", m, "proj")));
    return prlf::encode(tape, sample[m], proj, m, config_.tokens);
}

Var Model::head_logits(Tape& tape, const TokenFeature& feature) const {
    Var w = tape.parameter(params_, params_.index(key("head", feature.modality, "weight")));
    Var b = tape.parameter(params_, params_.index(key("head", feature.modality, "bias")));
    return ops::linear(pool(feature), w, b);
}

Var Model::head_probabilities(Tape& tape, const TokenFeature& feature) const {
    return ops::softmax_rows(head_logits(tape, feature));
}

InteractionWeights Model::interaction_weights(Tape& tape) const {
    auto p = [&](const std::string& name) { return tape.parameter(params_, params_.index(name)); };
    InteractionWeights w;
    for (Modality m : kModalities) {
        const std::size_t mi = index_of(m);
        w.refine[mi] = RefineWeights{p(key("refine", m, "w1")), p(key("refine", m, "b1")), p(key("refine", m, "w2")),
                                     p(key("refine", m, "b2"))};
        w.decomposer[mi] =
            DecomposerWeights{p(decomposer_key(config_, m, "w1")), p(decomposer_key(config_, m, "b1")),
                              p(decomposer_key(config_, m, "w2")), p(decomposer_key(config_, m, "b2")),
                              p(decomposer_key(config_, m, "w_aux"))};
    }
    return w;
}

ForwardResult Model::forward(Tape& tape, const SampleRecord& sample, const RoutingInputs& routing, Rng* rng,
                             const IterationObserver* observer) const {
    check_sample(sample);
    ForwardResult out;
    std::array<Var, 3> tokens;
    for (Modality m : kModalities) {
        const std::size_t mi = index_of(m);
        out.encoded[mi] = encode(tape, sample, m);
        tokens[mi] = out.encoded[mi].tokens;
        out.head_probabilities[mi] = head_probabilities(tape, out.encoded[mi]);
        const auto probs = out.head_probabilities[mi].value().values();
        out.alpha[mi] = routing.label ? probs[*routing.label] : *std::max_element(probs.begin(), probs.end());
    }
    if (routing.label) {
        out.uni_loss = ops::cross_entropy(out.head_probabilities[0], *routing.label);
        for (std::size_t mi = 1; mi < 3; ++mi)
            out.uni_loss = ops::add(out.uni_loss, ops::cross_entropy(out.head_probabilities[mi], *routing.label));
    }

    out.importance = route(out.alpha, routing.traces, routing.w, config_.routing);
    const InteractionResult interaction =
        run_iterations(tokens, out.importance, interaction_weights(tape), config_.interaction, rng, observer);
    out.phase_loss = interaction.phase_loss;

    const std::array<Var, 3> pooled{ops::mean_rows(interaction.features[index_of(out.importance.dominant)]),
                                    ops::mean_rows(interaction.features[index_of(out.importance.aux[0])]),
                                    ops::mean_rows(interaction.features[index_of(out.importance.aux[1])])};
    out.fused = ops::concat_cols(pooled);
    Var w = tape.parameter(params_, params_.index("classifier.weight"));
    Var b = tape.parameter(params_, params_.index("classifier.bias"));
    out.probabilities = ops::softmax_rows(ops::linear(out.fused, w, b));
    if (routing.label) out.task_loss = ops::cross_entropy(out.probabilities, *routing.label);
    return out;
}

double Model::fisher_trace(const SampleRecord& sample, Modality m, std::optional<std::size_t> label) const {
    if (!sample[m].live()) return 0.0;
    Tape tape;
    const TokenFeature feature = encode(tape, sample, m);
    Var logits = head_logits(tape, feature);
    Var probs = ops::softmax_rows(logits);
    const std::size_t cls = label ? *label : argmax(probs.value().values());
    require(cls < config_.shape.classes, "fisher_trace: class out of range");
    if (config_.fisher_target == FisherTarget::log_likelihood) {
        tape.backward(ops::log_prob(probs, cls));
    } else {
        DenseArray pick = DenseArray::matrix(config_.shape.classes, 1);
        pick(cls, 0) = 1.0;
        tape.backward(ops::matmul(logits, tape.constant(std::move(pick))));
    }
    return tape.parameter_gradient_squared_norm();
}

Triple Model::fisher_traces(const SampleRecord& sample, std::optional<std::size_t> label) const {
    check_sample(sample);
    return {fisher_trace(sample, Modality::V, label), fisher_trace(sample, Modality::A, label),
            fisher_trace(sample, Modality::L, label)};
}

std::vector<std::size_t> Model::branch_parameters(Modality m) const {
    return {params_.index(key("encoder", m, "proj")), params_.index(key("head", m, "weight")),
            params_.index(key("head", m, "bias"))};
}

Prediction predict(const Model& model, const SampleRecord& sample, const Triple& frozen_w,
                   const IterationObserver* observer) {
    RoutingInputs routing;
    routing.traces = model.fisher_traces(sample, std::nullopt);
    routing.w = frozen_w;
    Tape tape;
    const ForwardResult f = model.forward(tape, sample, routing, nullptr, observer);
    Prediction p;
    const auto probs = f.probabilities.value().values();
    p.probabilities.assign(probs.begin(), probs.end());
    p.predicted_class = argmax(probs);
    p.importance = f.importance;
    p.traces = routing.traces;
    const auto fused = f.fused.value().values();
    p.fused.assign(fused.begin(), fused.end());
    return p;
}

}  // namespace prlf
