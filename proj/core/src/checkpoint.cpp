#include "prlf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "prlf/error.hpp"
#include "prlf/model.hpp"
#include "prlf/training.hpp"

namespace prlf {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'R', 'L', 'F', 'C', 'K', 'P', 'T'};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void str(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}
    void bytes(void* p, std::size_t n, const char* what) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) fail(std::string("truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        std::uint8_t v;
        bytes(&v, 1, what);
        return v;
    }
    std::uint32_t u32(const char* what) {
        std::uint32_t v;
        bytes(&v, 4, what);
        return v;
    }
    std::uint64_t u64(const char* what) {
        std::uint64_t v;
        bytes(&v, 8, what);
        return v;
    }
    double f64(const char* what) {
        double v;
        bytes(&v, 8, what);
        return v;
    }
    std::string str(const char* what, std::uint64_t limit = 1u << 24) {
        const std::uint64_t n = u64(what);
        if (n > limit) fail(std::string("implausible length for ") + what);
        std::string s(n, '\0');
        bytes(s.data(), n, what);
        return s;
    }
    [[noreturn]] void fail(const std::string& message) const { throw ParseError(source_, 0, message); }

private:
    std::istream& in_;
    std::string source_;
};

}  // namespace

Checkpoint make_checkpoint(const RunConfig& config, const Model& model, const Trainer& trainer) {
    Checkpoint c;
    c.config = config;
    c.params = model.params();
    c.fisher = trainer.fisher();
    c.frozen_w = trainer.inference_weight();
    c.epoch = trainer.epochs_completed();
    c.rng_digest = epoch_mask_seed(config.train.seed, trainer.epochs_completed());
    return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
    Writer w(out);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.str(render_config(c.config));

    w.u64(c.params.count());
    for (std::size_t i = 0; i < c.params.count(); ++i) {
        const DenseArray& a = c.params.value(i);
        w.str(c.params.name(i));
        w.u32(static_cast<std::uint32_t>(a.shape().size()));
        for (std::size_t d : a.shape()) w.u64(d);
        for (double v : a.values()) w.f64(v);
    }

    w.u64(c.fisher.size());
    for (const auto& [id, rec] : c.fisher.records()) {
        w.u64(id);
        w.u64(rec.epoch);
        w.u8(rec.previous ? 1 : 0);
        for (double v : rec.current) w.f64(v);
        const Triple prev = rec.previous.value_or(Triple{});
        for (double v : prev) w.f64(v);
    }

    for (double v : c.frozen_w) w.f64(v);
    w.u64(c.epoch);
    w.u64(c.rng_digest);
    if (!out) throw std::runtime_error("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
    Reader r(in, source);
    char magic[8];
    r.bytes(magic, sizeof magic, "magic");
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) r.fail("not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32("version");
    if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));

    Checkpoint c;
    try {
        apply_values(c.config, parse_config_text(r.str("config"), source + " [config]"));
    } catch (const ConfigError& e) {
        r.fail(e.what());
    }

    const std::uint64_t count = r.u64("parameter count");
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string name = r.str("parameter name", 4096);
        const std::uint32_t rank = r.u32("parameter rank");
        if (rank > 2) r.fail("parameter '" + name + "' has rank " + std::to_string(rank));
        std::vector<std::size_t> shape(rank);
        std::uint64_t total = 1;
        for (auto& d : shape) {
            d = static_cast<std::size_t>(r.u64("parameter dims"));
            total *= d;
        }
        if (total > (1u << 26)) r.fail("parameter '" + name + "' is implausibly large");
        std::vector<double> data(total);
        for (double& v : data) v = r.f64("parameter data");
        c.params.add(std::move(name), DenseArray(std::move(shape), std::move(data)));
    }

    const std::uint64_t records = r.u64("fisher record count");
    for (std::uint64_t i = 0; i < records; ++i) {
        FisherRecord rec;
        rec.sample_id = r.u64("fisher id");
        rec.epoch = static_cast<std::size_t>(r.u64("fisher epoch"));
        const bool has_prev = r.u8("fisher flag") != 0;
        for (double& v : rec.current) v = r.f64("fisher current");
        Triple prev;
        for (double& v : prev) v = r.f64("fisher previous");
        if (has_prev) rec.previous = prev;
        c.fisher.insert(rec);
    }

    for (double& v : c.frozen_w) v = r.f64("frozen w");
    c.epoch = r.u64("epoch");
    c.rng_digest = r.u64("rng digest");
    if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes after checkpoint");
    return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
    write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open checkpoint");
    return read_checkpoint(in, path.string());
}

}  // namespace prlf
