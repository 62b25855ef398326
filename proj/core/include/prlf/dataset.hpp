#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prlf/array.hpp"
#include "prlf/modality.hpp"
#include "prlf/rng.hpp"

namespace prlf {

// One modality of one sample: T x d frames plus a per-frame presence mask.
// Masked-out frames hold exact zeros.
struct ModalitySequence {
    DenseArray frames;
    std::vector<std::uint8_t> mask;

    std::size_t length() const noexcept { return frames.rows(); }
    std::size_t dim() const noexcept { return frames.cols(); }
    bool live() const noexcept;
    std::size_t live_count() const noexcept;

    friend bool operator==(const ModalitySequence&, const ModalitySequence&) = default;
};

struct SampleRecord {
    std::uint64_t id = 0;
    std::array<ModalitySequence, 3> modalities;
    std::size_t label = 0;
    std::optional<double> score;

    ModalitySequence& operator[](Modality m) { return modalities[index_of(m)]; }
    const ModalitySequence& operator[](Modality m) const { return modalities[index_of(m)]; }

    friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct DatasetShape {
    std::array<std::size_t, 3> frames{16, 16, 16};  // T_V, T_A, T_L
    std::array<std::size_t, 3> dims{20, 20, 32};    // d_V, d_A, d_L
    std::size_t classes = 2;

    friend bool operator==(const DatasetShape&, const DatasetShape&) = default;
};

enum class Split { train, val, test, all };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct Dataset {
    DatasetShape shape;
    Split split = Split::all;
    std::string provenance;
    std::vector<SampleRecord> samples;

    std::size_t size() const noexcept { return samples.size(); }
    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Generator-side metadata. Kept in a separate type (and file) from SampleRecord so
// nothing on the model path can read it.
struct SampleTruth {
    std::uint64_t id = 0;
    Modality informative = Modality::L;
    std::vector<std::size_t> key_frames;

    friend bool operator==(const SampleTruth&, const SampleTruth&) = default;
};

struct GroundTruth {
    std::vector<SampleTruth> entries;

    const SampleTruth& find(std::uint64_t id) const;
    friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct SynthConfig {
    std::size_t samples = 1000;
    DatasetShape shape;
    double noise = 1.0;
    double amplitude_factor = 3.0;                  // key-frame amplitude in units of noise
    std::array<double, 3> informative_mix{0.25, 0.25, 0.5};  // (V, A, L)
    std::size_t key_frames = 6;
    std::uint64_t seed = 7;
};

struct SynthDataset {
    Dataset data;
    GroundTruth truth;
};

void validate(const SynthConfig& config);

// Labels uniform over classes; the informative modality's key frames carry
// amplitude * prototype(class, modality); everything else is N(0, noise^2).
SynthDataset generate(const SynthConfig& config);

// Unit-norm class prototype for (class, modality), fixed by the master seed. Prototypes of
// one modality are mutually orthogonal while the class count does not exceed its dimension.
std::vector<double> class_prototype(std::uint64_t seed, std::size_t cls, Modality m, std::size_t dim);

// Deterministic id-range split; splits are disjoint by sample id.
struct DatasetSplits {
    Dataset train, val, test;
    GroundTruth train_truth, val_truth, test_truth;
};
DatasetSplits split_dataset(const SynthDataset& all, double train_fraction, double val_fraction);

// Drops every frame independently with probability p; dropped frames are zeroed.
void apply_intra_mask(SampleRecord& sample, double p, Rng& rng);
// Zeroes every modality outside `available`.
void apply_inter_mask(SampleRecord& sample, ModalitySet available);
// Zeroes the given frames of one modality.
void drop_frames(SampleRecord& sample, Modality m, const std::vector<std::size_t>& frames);

// Per-sample mask stream: derive_seed(seed, {stream, sample id}); independent of dataset order.
Rng mask_rng(std::uint64_t seed, Stream s, std::uint64_t sample_id);

// Copy of `data` with intra masking at rate p, each sample from its own stream.
Dataset masked_copy(const Dataset& data, double p, std::uint64_t seed, Stream s = Stream::eval_mask);
Dataset masked_copy(const Dataset& data, ModalitySet available);

// Line-delimited JSON: a header line, then one sample per line.
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);
void save_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_truth(const std::filesystem::path& path);
// Frame masks only, one line per sample, for replaying an evaluation condition.
void save_masks(const Dataset& data, const std::filesystem::path& path);

}  // namespace prlf
