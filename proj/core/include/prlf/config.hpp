#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "prlf/dataset.hpp"
#include "prlf/model.hpp"
#include "prlf/modality.hpp"
#include "prlf/training.hpp"

namespace prlf {

enum class F1Mode { binary, weighted };

struct EvalConfig {
    std::vector<double> rates{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::vector<double> phase_rates{0.0, 0.3, 0.6, 0.9};
    std::size_t seeds = 5;      // mask seeds per condition
    std::uint64_t seed = 1;     // master seed the mask seeds derive from
    double p = 0.0;             // intra rate for single evaluations
    ModalitySet subset = ModalitySet::all();
    F1Mode f1 = F1Mode::binary;
};

struct RunConfig {
    SynthConfig data;
    double train_fraction = 0.7;
    double val_fraction = 0.1;
    ModelConfig model;
    TrainConfig train;
    EvalConfig eval;
};

// Flat "section.key" -> value view of a RunConfig.
using KeyValues = std::map<std::string, std::string, std::less<>>;

KeyValues to_key_values(const RunConfig& config);
// Applies every entry; unknown keys and unparsable values throw ConfigError.
void apply_values(RunConfig& config, const KeyValues& values);
void apply_value(RunConfig& config, std::string_view key, std::string_view value);
// Range checks across all sections; throws ConfigError.
void validate(const RunConfig& config);

// INI-style file: [data] [model] [train] [eval] sections of key = value lines.
KeyValues read_config_file(const std::filesystem::path& path);
KeyValues parse_config_text(const std::string& text, const std::string& source = "<config>");
std::string render_config(const RunConfig& config);

// Named ablations: wo-cmi, wo-fimi, wo-amre, wo-pi, wo-luni, wo-lphase.
void apply_ablation(RunConfig& config, std::string_view name);
const std::vector<std::string>& ablation_names();

// Sets the data, training and evaluation master seeds at once.
void set_master_seed(RunConfig& config, std::uint64_t seed);

// Model config with the input shape taken from the data section.
ModelConfig model_config(const RunConfig& config);

// Model initialization seed derived from the training seed.
std::uint64_t init_seed(const RunConfig& config);

std::string to_string(RoutingMode mode);
std::string to_string(FusionMode mode);
std::string to_string(GateMode mode);
std::string to_string(FisherTarget target);
std::string to_string(OptimizerKind kind);
std::string to_string(F1Mode mode);

}  // namespace prlf
