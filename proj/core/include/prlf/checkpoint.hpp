#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "prlf/amre.hpp"
#include "prlf/config.hpp"
#include "prlf/params.hpp"

namespace prlf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    RunConfig config;
    ParameterStore params;
    FisherStore fisher;
    Triple frozen_w{};
    std::uint64_t epoch = 0;        // epochs completed
    std::uint64_t rng_digest = 0;   // seed of the next epoch's mask stream

    friend bool operator==(const Checkpoint& a, const Checkpoint& b) {
        return to_key_values(a.config) == to_key_values(b.config) && a.params == b.params &&
               a.fisher == b.fisher && a.frozen_w == b.frozen_w && a.epoch == b.epoch &&
               a.rng_digest == b.rng_digest;
    }
};

class Trainer;
class Model;

Checkpoint make_checkpoint(const RunConfig& config, const Model& model, const Trainer& trainer);

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "<checkpoint>");

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace prlf
