#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "prlf/amre.hpp"
#include "prlf/dataset.hpp"
#include "prlf/model.hpp"
#include "prlf/params.hpp"

namespace prlf {

enum class OptimizerKind { sgd_momentum, adam };

struct TrainConfig {
    double eta1 = 0.5;  // L_uni weight
    double eta2 = 0.1;  // L_phase weight
    double learning_rate = 0.02;
    double momentum = 0.9;
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    double clip_norm = 5.0;  // global gradient-norm clip; 0 disables
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double missing_rate = 0.5;  // intra-modality drop rate applied each epoch
    std::uint64_t seed = 1;
};

void validate(const TrainConfig& config);

struct LossComponents {
    double total = 0.0;
    double task = 0.0;
    double uni = 0.0;
    double phase = 0.0;
};

// L_task + eta1 * L_uni + eta2 * L_phase.
Var total_loss(Var task, Var uni, Var phase, double eta1, double eta2);
LossComponents combine_losses(double task, double uni, double phase, double eta1, double eta2);

struct EpochStats {
    std::size_t epoch = 0;
    std::uint64_t mask_seed = 0;
    LossComponents loss;  // sample means
    double train_accuracy = 0.0;
    Triple mean_w{};
    Triple mean_mu{};
    Triple mean_trace{};
    std::array<std::size_t, 3> dominant_counts{};
};

class Optimizer {
public:
    Optimizer(const ParameterStore& params, const TrainConfig& config);
    void step(ParameterStore& params, const GradientBuffer& grad);

private:
    TrainConfig config_;
    GradientBuffer first_;
    GradientBuffer second_;
    std::size_t steps_ = 0;
};

// Epoch-level mask seed: derived from the master seed and the epoch index.
std::uint64_t epoch_mask_seed(std::uint64_t seed, std::size_t epoch);

class Trainer {
public:
    Trainer(Model& model, TrainConfig config);

    // One pass: fresh masks, shuffled minibatches, optimizer steps, then Fisher traces
    // with the updated weights rotated into the store.
    EpochStats train_epoch(const Dataset& data, std::size_t epoch);

    std::vector<EpochStats> fit(const Dataset& data, const std::function<void(const EpochStats&)>& on_epoch = {});

    // Loss of one sample under the current routing state, without updating anything.
    LossComponents sample_loss(const SampleRecord& sample, Rng* rng) const;

    const FisherStore& fisher() const noexcept { return fisher_; }
    FisherStore& fisher() noexcept { return fisher_; }
    const TrainConfig& config() const noexcept { return config_; }
    std::size_t epochs_completed() const noexcept { return epochs_completed_; }

    // Inference-time w: per-modality mean fusion weight over the latest Fisher records.
    Triple inference_weight() const;

    RoutingInputs routing_for(const SampleRecord& sample) const;

private:
    Model& model_;
    TrainConfig config_;
    Optimizer optimizer_;
    FisherStore fisher_;
    std::size_t epochs_completed_ = 0;
};

}  // namespace prlf
