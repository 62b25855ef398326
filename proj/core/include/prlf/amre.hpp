#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>

#include "prlf/modality.hpp"

namespace prlf {

using Triple = std::array<double, 3>;  // indexed by index_of(Modality): (V, A, L)

// How the dynamic weight is formed from the per-modality Fisher growth.
enum class FusionMode { elementwise, scalar };

// Which importance signal drives the router. The non-full modes are the ablations:
// confidence_only = "w/o FIMI", fisher_only = "w/o CMI", uniform = "w/o AMRE".
enum class RoutingMode { full, confidence_only, fisher_only, uniform };

struct ImportanceVector {
    Triple alpha_hat{};
    Triple beta_hat{};
    Triple w{};
    Triple mu{};
    Modality dominant = Modality::L;
    std::array<Modality, 2> aux{Modality::A, Modality::V};
};

// Per-sample Fisher traces for the latest epoch and the one before it.
struct FisherRecord {
    std::uint64_t sample_id = 0;
    Triple current{};
    std::optional<Triple> previous;
    std::size_t epoch = 0;

    friend bool operator==(const FisherRecord&, const FisherRecord&) = default;
};

// alpha / ||alpha||_1.
Triple confidence_vector(const Triple& alpha);

// beta / ||beta||_1, or the uniform vector when ||beta||_1 < 1e-12.
Triple fisher_importance(const Triple& traces);

// sigmoid of the relative trace growth (cur - prev) / max(cur, 1e-12). Zero when the
// record has no previous epoch.
Triple fusion_weight(const FisherRecord& record, FusionMode mode = FusionMode::elementwise);

// mu = (1 - w) * alpha_hat + w * beta_hat, renormalized to sum 1 when w is not constant.
ImportanceVector modality_importance(const Triple& alpha_hat, const Triple& beta_hat, const Triple& w);

// Full routing step from raw confidences and traces under an ablation mode.
ImportanceVector route(const Triple& alpha, const Triple& traces, const Triple& w, RoutingMode mode);

// argmax with ties resolved L > A > V.
Modality dominant_of(const Triple& mu);
// The two non-dominant modalities in precedence order.
std::array<Modality, 2> auxiliaries_of(Modality dominant);

// Single-writer store of per-sample records, keyed by sample id.
class FisherStore {
public:
    // Rotates current -> previous and stores the new traces.
    void record(std::uint64_t sample_id, const Triple& traces, std::size_t epoch);
    const FisherRecord* find(std::uint64_t sample_id) const;
    void insert(FisherRecord record);

    std::size_t size() const noexcept { return records_.size(); }
    const std::map<std::uint64_t, FisherRecord>& records() const noexcept { return records_; }

    // Mean of fusion_weight over all records (zeros when empty).
    Triple mean_weight(FusionMode mode = FusionMode::elementwise) const;

    friend bool operator==(const FisherStore&, const FisherStore&) = default;

private:
    std::map<std::uint64_t, FisherRecord> records_;
};

}  // namespace prlf
