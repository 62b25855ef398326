#include "prlf/amre.hpp"

#include <algorithm>
#include <cmath>

#include "prlf/error.hpp"

namespace prlf {

namespace {

constexpr double kEps = 1e-12;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Triple l1_normalized(const Triple& v) {
    const double norm = std::abs(v[0]) + std::abs(v[1]) + std::abs(v[2]);
    if (norm < kEps) return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    return {v[0] / norm, v[1] / norm, v[2] / norm};
}

}  // namespace

Triple confidence_vector(const Triple& alpha) {
    for (double a : alpha) require(a >= 0.0 && std::isfinite(a), "confidence_vector: confidences must be >= 0");
    return l1_normalized(alpha);
}

Triple fisher_importance(const Triple& traces) {
    for (double t : traces) require(t >= 0.0 && std::isfinite(t), "fisher_importance: traces must be >= 0");
    return l1_normalized(traces);
}

Triple fusion_weight(const FisherRecord& record, FusionMode mode) {
    if (!record.previous) return {0.0, 0.0, 0.0};
    Triple delta{};
    for (std::size_t m = 0; m < 3; ++m)
        delta[m] = (record.current[m] - (*record.previous)[m]) / std::max(record.current[m], kEps);
    if (mode == FusionMode::scalar) {
        const double w = sigmoid((delta[0] + delta[1] + delta[2]) / 3.0);
        return {w, w, w};
    }
    return {sigmoid(delta[0]), sigmoid(delta[1]), sigmoid(delta[2])};
}

Modality dominant_of(const Triple& mu) {
    Modality best = kPrecedence[0];
    for (Modality m : kPrecedence)
        if (mu[index_of(m)] > mu[index_of(best)]) best = m;
    return best;
}

std::array<Modality, 2> auxiliaries_of(Modality dominant) {
    std::array<Modality, 2> aux{};
    std::size_t k = 0;
    for (Modality m : kPrecedence)
        if (m != dominant) aux[k++] = m;
    return aux;
}

ImportanceVector modality_importance(const Triple& alpha_hat, const Triple& beta_hat, const Triple& w) {
    for (double x : w) require(x >= 0.0 && x <= 1.0, "modality_importance: weights must lie in [0, 1]");
    ImportanceVector iv;
    iv.alpha_hat = alpha_hat;
    iv.beta_hat = beta_hat;
    iv.w = w;
    for (std::size_t m = 0; m < 3; ++m) iv.mu[m] = (1.0 - w[m]) * alpha_hat[m] + w[m] * beta_hat[m];
    // A constant w is already a convex combination of two distributions.
    if (!(w[0] == w[1] && w[1] == w[2])) iv.mu = l1_normalized(iv.mu);
    iv.dominant = dominant_of(iv.mu);
    iv.aux = auxiliaries_of(iv.dominant);
    return iv;
}

ImportanceVector route(const Triple& alpha, const Triple& traces, const Triple& w, RoutingMode mode) {
    const Triple alpha_hat = confidence_vector(alpha);
    const Triple beta_hat = fisher_importance(traces);
    switch (mode) {
        case RoutingMode::full: return modality_importance(alpha_hat, beta_hat, w);
        case RoutingMode::confidence_only: return modality_importance(alpha_hat, beta_hat, {0.0, 0.0, 0.0});
        case RoutingMode::fisher_only: return modality_importance(alpha_hat, beta_hat, {1.0, 1.0, 1.0});
        case RoutingMode::uniform: {
            ImportanceVector iv;
            iv.alpha_hat = alpha_hat;
            iv.beta_hat = beta_hat;
            iv.w = w;
            iv.mu = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
            iv.dominant = dominant_of(iv.mu);
            iv.aux = auxiliaries_of(iv.dominant);
            return iv;
        }
    }
    throw ContractViolation("route: unknown routing mode");
}

void FisherStore::record(std::uint64_t sample_id, const Triple& traces, std::size_t epoch) {
    for (double t : traces) require(t >= 0.0 && std::isfinite(t), "FisherStore: traces must be finite and >= 0");
    auto [it, inserted] = records_.try_emplace(sample_id);
    FisherRecord& r = it->second;
    if (!inserted) r.previous = r.current;
    r.sample_id = sample_id;
    r.current = traces;
    r.epoch = epoch;
}

const FisherRecord* FisherStore::find(std::uint64_t sample_id) const {
    auto it = records_.find(sample_id);
    return it == records_.end() ? nullptr : &it->second;
}

void FisherStore::insert(FisherRecord record) { records_[record.sample_id] = std::move(record); }

Triple FisherStore::mean_weight(FusionMode mode) const {
    Triple sum{};
    if (records_.empty()) return sum;
    for (const auto& [id, r] : records_) {
        const Triple w = fusion_weight(r, mode);
        for (std::size_t m = 0; m < 3; ++m) sum[m] += w[m];
    }
    for (double& s : sum) s /= static_cast<double>(records_.size());
    return sum;
}

}  // namespace prlf
