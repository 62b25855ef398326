#include "prlf_cli/manifest.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>

namespace prlf::cli {

std::string git_blob_hash(std::string_view content) {
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest, &length) != 1)
        throw std::runtime_error("SHA-1 digest failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string file_blob_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path.string() + "' for hashing");
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return git_blob_hash(content);
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

RunManifest::RunManifest(std::string command, const RunConfig& config, std::filesystem::path out_dir)
    : out_dir_(std::move(out_dir)) {
    doc_["command"] = command;
    doc_["started"] = utc_timestamp();
    doc_["out_dir"] = std::filesystem::absolute(out_dir_).string();
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [key, value] : to_key_values(config)) cfg[key] = value;
    doc_["config"] = cfg;
    doc_["config_hash"] = git_blob_hash(render_config(config));
    doc_["inputs"] = nlohmann::json::array();
    doc_["outputs"] = nlohmann::json::array();
    doc_["metrics"] = nlohmann::json::object();
}

void RunManifest::add_input(const std::filesystem::path& path) {
    doc_["inputs"].push_back(
        {{"path", std::filesystem::absolute(path).string()}, {"hash", file_blob_hash(path)}});
}

void RunManifest::add_output(const std::filesystem::path& path) {
    for (const auto& p : outputs_)
        if (p == path) throw std::logic_error("output '" + path.string() + "' registered twice");
    outputs_.push_back(path);
}

std::filesystem::path RunManifest::write() {
    for (const auto& p : outputs_)
        doc_["outputs"].push_back(
            {{"path", std::filesystem::relative(p, out_dir_).generic_string()}, {"hash", file_blob_hash(p)}});
    doc_["finished"] = utc_timestamp();
    const auto path = out_dir_ / (doc_["command"].get<std::string>() + ".manifest.json");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
    out << doc_.dump(2) << '\n';
    return path;
}

nlohmann::json comparable(nlohmann::json manifest) {
    manifest.erase("started");
    manifest.erase("finished");
    manifest.erase("out_dir");
    for (auto& input : manifest["inputs"]) input.erase("path");
    return manifest;
}

}  // namespace prlf::cli
