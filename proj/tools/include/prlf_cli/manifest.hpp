#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prlf/config.hpp"

namespace prlf::cli {

// SHA-1 of "blob <size>\0<content>", as git computes object ids.
std::string git_blob_hash(std::string_view content);
std::string file_blob_hash(const std::filesystem::path& path);

std::string utc_timestamp();

// Record of one command invocation. Output paths are stored relative to the output
// directory; every file the command writes is listed exactly once.
class RunManifest {
public:
    RunManifest(std::string command, const RunConfig& config, std::filesystem::path out_dir);

    void add_input(const std::filesystem::path& path);
    void add_output(const std::filesystem::path& path);
    nlohmann::json& metrics() { return doc_["metrics"]; }
    nlohmann::json& doc() { return doc_; }

    // Hashes the outputs, stamps the end time, and writes <out>/<command>.manifest.json.
    std::filesystem::path write();

private:
    nlohmann::json doc_;
    std::filesystem::path out_dir_;
    std::vector<std::filesystem::path> outputs_;
};

// The manifest without timestamps and location-dependent paths, for run-to-run comparison.
nlohmann::json comparable(nlohmann::json manifest);

}  // namespace prlf::cli
