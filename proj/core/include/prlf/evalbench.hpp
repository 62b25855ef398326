#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prlf/config.hpp"
#include "prlf/dataset.hpp"
#include "prlf/model.hpp"

namespace prlf {

struct Metrics {
    double f1 = 0.0;
    double accuracy = 0.0;
    std::optional<double> mae;
    std::size_t count = 0;
};

// F1 for class 1 (binary) or support-weighted over classes; accuracy; MAE when both
// score spans are non-empty.
Metrics compute_metrics(std::span<const std::size_t> predicted, std::span<const std::size_t> labels,
                        F1Mode mode = F1Mode::binary, std::span<const double> predicted_scores = {},
                        std::span<const double> true_scores = {});

// A trained model together with the inference-time fusion weight.
struct FrozenModel {
    Model model;
    Triple w{};
};

struct Evaluation {
    Metrics metrics;
    std::vector<std::size_t> predicted;
    Triple mean_mu{};
    Triple min_mu{1.0, 1.0, 1.0};
    Triple max_mu{};
    std::array<std::size_t, 3> dominant_counts{};
};

Evaluation evaluate(const FrozenModel& frozen, const Dataset& data, F1Mode mode = F1Mode::binary);

struct SweepRow {
    std::string condition;          // "p=0.3" or "{l,a}" or "Avg."
    double rate = 0.0;              // intra rate applied on top of the subset
    std::string subset = "lav";
    std::size_t samples = 0;
    std::vector<std::uint64_t> mask_seeds;
    std::vector<Metrics> per_seed;
    double f1_mean = 0.0, f1_std = 0.0;
    double acc_mean = 0.0, acc_std = 0.0;
    std::optional<double> mae_mean, mae_std;
};

// k-th mask seed of an evaluation master seed. Identical across rates, so the frames dropped
// at a lower rate are a subset of those dropped at a higher one.
std::uint64_t eval_mask_seed(std::uint64_t master, std::size_t k);

// One condition: restrict to `subset`, then intra-mask at `rate` under each of `seeds` mask seeds.
SweepRow sweep_condition(const FrozenModel& frozen, const Dataset& data, ModalitySet subset, double rate,
                         std::uint64_t master_seed, std::size_t seeds, F1Mode mode = F1Mode::binary);

std::vector<SweepRow> sweep_intra(const FrozenModel& frozen, const Dataset& data, std::span<const double> rates,
                                  std::uint64_t master_seed, std::size_t seeds, F1Mode mode = F1Mode::binary);

// Seven subset rows in table order, then the "Avg." row over the six incomplete subsets.
std::vector<SweepRow> sweep_inter(const FrozenModel& frozen, const Dataset& data, std::uint64_t master_seed,
                                  std::size_t seeds, double rate = 0.0, F1Mode mode = F1Mode::binary);

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows);
std::vector<SweepRow> read_sweep_table(std::istream& in, const std::string& source = "<table>");

// Cosine similarity; nullopt when either vector has zero norm.
std::optional<double> cosine(std::span<const double> u, std::span<const double> v);
// Angle in degrees between two vectors; nullopt when either has zero norm.
std::optional<double> angle_degrees(std::span<const double> u, std::span<const double> v);

struct PhaseResult {
    double rate = 0.0;
    std::uint64_t mask_seed = 0;
    double mean_degrees = 0.0;
    std::size_t counted = 0;
    std::size_t skipped = 0;
};

// Mean angle between each sample's pooled fused feature under intra masking at rate p and
// without masking.
PhaseResult phase_difference(const FrozenModel& frozen, const Dataset& data, double p, std::uint64_t mask_seed);

// Mean over samples, iterations, auxiliaries and tokens of |cos(proj_k, res_k)|; zero-norm
// rows are skipped.
double mean_abs_projection_cosine(const FrozenModel& frozen, const Dataset& data);

}  // namespace prlf
