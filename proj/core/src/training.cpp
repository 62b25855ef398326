#include "prlf/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "prlf/error.hpp"
#include "prlf/ops.hpp"

namespace prlf {

void validate(const TrainConfig& c) {
    require(c.eta1 >= 0.0 && c.eta2 >= 0.0, "TrainConfig: loss weights must be >= 0");
    require(c.learning_rate > 0.0, "TrainConfig: learning rate must be positive");
    require(c.momentum >= 0.0 && c.momentum < 1.0, "TrainConfig: momentum must lie in [0, 1)");
    require(c.clip_norm >= 0.0, "TrainConfig: clip norm must be >= 0");
    require(c.batch_size >= 1, "TrainConfig: batch size must be >= 1");
    require(c.missing_rate >= 0.0 && c.missing_rate <= 1.0, "TrainConfig: missing rate must lie in [0, 1]");
}

Var total_loss(Var task, Var uni, Var phase, double eta1, double eta2) {
    return ops::add(task, ops::add(ops::scale(uni, eta1), ops::scale(phase, eta2)));
}

LossComponents combine_losses(double task, double uni, double phase, double eta1, double eta2) {
    return LossComponents{task + (eta1 * uni + eta2 * phase), task, uni, phase};
}

Optimizer::Optimizer(const ParameterStore& params, const TrainConfig& config)
    : config_(config), first_(params), second_(params) {}

void Optimizer::step(ParameterStore& params, const GradientBuffer& grad) {
    ++steps_;
    double clip = 1.0;
    if (config_.clip_norm > 0.0) {
        const double norm = std::sqrt(grad.squared_norm());
        if (norm > config_.clip_norm) clip = config_.clip_norm / norm;
    }
    const double lr = config_.learning_rate;
    if (config_.optimizer == OptimizerKind::sgd_momentum) {
        for (std::size_t i = 0; i < params.count(); ++i) {
            auto p = params.value(i).values();
            auto v = first_[i].values();
            auto g = grad[i].values();
            for (std::size_t j = 0; j < p.size(); ++j) {
                v[j] = config_.momentum * v[j] + clip * g[j];
                p[j] -= lr * v[j];
            }
        }
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.count(); ++i) {
        auto p = params.value(i).values();
        auto m = first_[i].values();
        auto s = second_[i].values();
        auto g = grad[i].values();
        for (std::size_t j = 0; j < p.size(); ++j) {
            const double gj = clip * g[j];
            m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
            s[j] = beta2 * s[j] + (1.0 - beta2) * gj * gj;
            p[j] -= lr * (m[j] / c1) / (std::sqrt(s[j] / c2) + eps);
        }
    }
}

std::uint64_t epoch_mask_seed(std::uint64_t seed, std::size_t epoch) {
    return derive_seed(seed, {stream(Stream::epoch_mask), epoch});
}

Trainer::Trainer(Model& model, TrainConfig config)
    : model_(model), config_(config), optimizer_(model.params(), config) {
    validate(config_);
}

RoutingInputs Trainer::routing_for(const SampleRecord& sample) const {
    RoutingInputs r;
    r.label = sample.label;
    if (const FisherRecord* rec = fisher_.find(sample.id)) {
        r.traces = rec->current;
        r.w = fusion_weight(*rec, model_.config().fusion);
    }
    return r;
}

LossComponents Trainer::sample_loss(const SampleRecord& sample, Rng* rng) const {
    Tape tape;
    const ForwardResult f = model_.forward(tape, sample, routing_for(sample), rng);
    return combine_losses(f.task_loss.item(), f.uni_loss.item(), f.phase_loss.item(), config_.eta1, config_.eta2);
}

EpochStats Trainer::train_epoch(const Dataset& data, std::size_t epoch) {
    require(!data.samples.empty(), "train_epoch: empty dataset");
    EpochStats stats;
    stats.epoch = epoch;
    stats.mask_seed = epoch_mask_seed(config_.seed, epoch);
    const Dataset masked = masked_copy(data, config_.missing_rate, stats.mask_seed, Stream::epoch_mask);

    std::vector<std::size_t> order(masked.samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(config_.seed, {stream(Stream::shuffle), epoch}));
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform01(shuffle) * static_cast<double>(i));
        std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    GradientBuffer grad(model_.params());
    std::size_t correct = 0;
    const std::size_t n = order.size();
    for (std::size_t begin = 0, batch = 0; begin < n; begin += config_.batch_size, ++batch) {
        const std::size_t end = std::min(n, begin + config_.batch_size);
        grad.zero();
        for (std::size_t k = begin; k < end; ++k) {
            const SampleRecord& sample = masked.samples[order[k]];
            Rng dropout(derive_seed(config_.seed, {stream(Stream::dropout), epoch, sample.id}));
            Tape tape;
            ForwardResult f;
            Var loss;
            try {
                f = model_.forward(tape, sample, routing_for(sample), &dropout);
                loss = total_loss(f.task_loss, f.uni_loss, f.phase_loss, config_.eta1, config_.eta2);
            } catch (const NumericError& e) {
                std::ostringstream msg;
                msg << "epoch " << epoch << " batch " << batch << " sample " << sample.id << ": " << e.what();
                throw NumericError(msg.str());
            }
            tape.backward(loss, &grad);

            const LossComponents lc = combine_losses(f.task_loss.item(), f.uni_loss.item(), f.phase_loss.item(),
                                                     config_.eta1, config_.eta2);
            stats.loss.total += lc.total;
            stats.loss.task += lc.task;
            stats.loss.uni += lc.uni;
            stats.loss.phase += lc.phase;
            const auto probs = f.probabilities.value().values();
            const auto pred = static_cast<std::size_t>(
                std::distance(probs.begin(), std::max_element(probs.begin(), probs.end())));
            correct += pred == sample.label ? 1 : 0;
            for (std::size_t m = 0; m < 3; ++m) {
                stats.mean_w[m] += f.importance.w[m];
                stats.mean_mu[m] += f.importance.mu[m];
            }
            ++stats.dominant_counts[index_of(f.importance.dominant)];
        }
        grad.scale(1.0 / static_cast<double>(end - begin));
        if (!grad.all_finite()) {
            std::ostringstream msg;
            msg << "epoch " << epoch << " batch " << batch << ": non-finite gradient";
            throw NumericError(msg.str());
        }
        optimizer_.step(model_.params(), grad);
    }

    for (const SampleRecord& sample : masked.samples) {
        const Triple traces = model_.fisher_traces(sample, sample.label);
        fisher_.record(sample.id, traces, epoch);
        for (std::size_t m = 0; m < 3; ++m) stats.mean_trace[m] += traces[m];
    }

    const double inv = 1.0 / static_cast<double>(n);
    stats.loss.total *= inv;
    stats.loss.task *= inv;
    stats.loss.uni *= inv;
    stats.loss.phase *= inv;
    stats.train_accuracy = static_cast<double>(correct) * inv;
    for (std::size_t m = 0; m < 3; ++m) {
        stats.mean_w[m] *= inv;
        stats.mean_mu[m] *= inv;
        stats.mean_trace[m] *= inv;
    }
    epochs_completed_ = epoch + 1;
    return stats;
}

std::vector<EpochStats> Trainer::fit(const Dataset& data, const std::function<void(const EpochStats&)>& on_epoch) {
    std::vector<EpochStats> history;
    for (std::size_t e = epochs_completed_; e < config_.epochs; ++e) {
        history.push_back(train_epoch(data, e));
        if (on_epoch) on_epoch(history.back());
    }
    return history;
}

Triple Trainer::inference_weight() const {
    return fisher_.mean_weight(model_.config().fusion);
}

}  // namespace prlf
