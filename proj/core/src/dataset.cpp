#include "prlf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prlf/error.hpp"

namespace prlf {

using nlohmann::json;

bool ModalitySequence::live() const noexcept {
    return std::any_of(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; });
}

std::size_t ModalitySequence::live_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t b) { return b != 0; }));
}

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
        case Split::all: return "all";
    }
    return "all";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    if (s == "all") return Split::all;
    throw ContractViolation("unknown split tag " + s);
}

const SampleTruth& GroundTruth::find(std::uint64_t id) const {
    auto it = std::find_if(entries.begin(), entries.end(), [id](const SampleTruth& t) { return t.id == id; });
    if (it == entries.end()) throw ContractViolation("GroundTruth: no entry for sample " + std::to_string(id));
    return *it;
}

void validate(const SynthConfig& c) {
    require(c.samples > 0, "SynthConfig: sample count must be positive");
    require(c.shape.classes >= 2, "SynthConfig: need at least two classes");
    require(c.noise > 0.0, "SynthConfig: noise scale must be positive");
    for (std::size_t m = 0; m < 3; ++m) {
        require(c.shape.frames[m] >= 1 && c.shape.dims[m] >= 1, "SynthConfig: empty modality shape");
        require(c.key_frames <= c.shape.frames[m], "SynthConfig: key-frame count exceeds sequence length");
        require(c.informative_mix[m] >= 0.0, "SynthConfig: negative informativeness weight");
    }
    const double total = c.informative_mix[0] + c.informative_mix[1] + c.informative_mix[2];
    require(total > 0.0, "SynthConfig: informativeness mix sums to zero");
}

std::vector<double> class_prototype(std::uint64_t seed, std::size_t cls, Modality m, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> basis;
    for (std::size_t c = 0; c <= cls; ++c) {
        Rng rng(derive_seed(seed, {stream(Stream::synth), c, index_of(m)}));
        std::vector<double> v(dim);
        for (double& x : v) x = normal(rng);
        // Gram-Schmidt against the earlier classes while the dimension allows it.
        if (c < dim)
            for (const auto& u : basis) {
                double dot = 0.0;
                for (std::size_t i = 0; i < dim; ++i) dot += v[i] * u[i];
                for (std::size_t i = 0; i < dim; ++i) v[i] -= dot * u[i];
            }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
        basis.push_back(std::move(v));
    }
    return basis.back();
}

namespace {

Modality draw_informative(const std::array<double, 3>& mix, double u) {
    const double total = mix[0] + mix[1] + mix[2];
    double acc = 0.0;
    for (Modality m : kModalities) {
        acc += mix[index_of(m)] / total;
        if (u < acc) return m;
    }
    return Modality::L;
}

}  // namespace

SynthDataset generate(const SynthConfig& config) {
    validate(config);
    const DatasetShape& shape = config.shape;
    std::array<std::vector<std::vector<double>>, 3> prototypes;
    for (Modality m : kModalities)
        for (std::size_t c = 0; c < shape.classes; ++c)
            prototypes[index_of(m)].push_back(class_prototype(config.seed, c, m, shape.dims[index_of(m)]));

    SynthDataset out;
    out.data.shape = shape;
    out.data.split = Split::all;
    std::ostringstream prov;
    prov << "synthetic seed=" << config.seed << " samples=" << config.samples << " noise=" << config.noise
         << " key_frames=" << config.key_frames;
    out.data.provenance = prov.str();
    out.data.samples.reserve(config.samples);
    out.truth.entries.reserve(config.samples);

    const double amplitude = config.amplitude_factor * config.noise;
    for (std::size_t i = 0; i < config.samples; ++i) {
        Rng rng(derive_seed(config.seed, {stream(Stream::synth_sample), i}));
        std::normal_distribution<double> noise(0.0, config.noise);

        SampleRecord s;
        s.id = i;
        s.label = std::min<std::size_t>(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(shape.classes)),
                                        shape.classes - 1);
        SampleTruth truth;
        truth.id = i;
        truth.informative = draw_informative(config.informative_mix, uniform01(rng));

        const std::size_t ti = shape.frames[index_of(truth.informative)];
        std::vector<std::size_t> order(ti);
        for (std::size_t t = 0; t < ti; ++t) order[t] = t;
        for (std::size_t k = 0; k < config.key_frames; ++k) {
            const std::size_t j =
                k + std::min<std::size_t>(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(ti - k)),
                                          ti - k - 1);
            std::swap(order[k], order[j]);
        }
        truth.key_frames.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.key_frames));
        std::sort(truth.key_frames.begin(), truth.key_frames.end());

        for (Modality m : kModalities) {
            const std::size_t t_len = shape.frames[index_of(m)], dim = shape.dims[index_of(m)];
            ModalitySequence& seq = s[m];
            seq.frames = DenseArray::matrix(t_len, dim);
            seq.mask.assign(t_len, 1);
            for (double& v : seq.frames.values()) v = noise(rng);
        }
        const auto& proto = prototypes[index_of(truth.informative)][s.label];
        ModalitySequence& inf = s[truth.informative];
        for (std::size_t t : truth.key_frames)
            for (std::size_t d = 0; d < inf.dim(); ++d) inf.frames(t, d) += amplitude * proto[d];

        out.data.samples.push_back(std::move(s));
        out.truth.entries.push_back(std::move(truth));
    }
    return out;
}

DatasetSplits split_dataset(const SynthDataset& all, double train_fraction, double val_fraction) {
    require(train_fraction > 0.0 && val_fraction >= 0.0 && train_fraction + val_fraction < 1.0,
            "split_dataset: fractions must leave a non-empty test split");
    const std::size_t n = all.data.samples.size();
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
    DatasetSplits out;
    auto fill = [&](Dataset& d, GroundTruth& t, Split tag, std::size_t begin, std::size_t end) {
        d.shape = all.data.shape;
        d.split = tag;
        d.provenance = all.data.provenance + " split=" + to_string(tag);
        d.samples.assign(all.data.samples.begin() + static_cast<std::ptrdiff_t>(begin),
                         all.data.samples.begin() + static_cast<std::ptrdiff_t>(end));
        t.entries.assign(all.truth.entries.begin() + static_cast<std::ptrdiff_t>(begin),
                         all.truth.entries.begin() + static_cast<std::ptrdiff_t>(end));
    };
    fill(out.train, out.train_truth, Split::train, 0, n_train);
    fill(out.val, out.val_truth, Split::val, n_train, n_train + n_val);
    fill(out.test, out.test_truth, Split::test, n_train + n_val, n);
    return out;
}

void apply_intra_mask(SampleRecord& sample, double p, Rng& rng) {
    require(p >= 0.0 && p <= 1.0, "apply_intra_mask: rate must lie in [0, 1]");
    for (ModalitySequence& seq : sample.modalities) {
        for (std::size_t t = 0; t < seq.length(); ++t) {
            // Always draw, so masks at different rates are nested for one stream.
            if (uniform01(rng) < p) {
                seq.mask[t] = 0;
                for (std::size_t d = 0; d < seq.dim(); ++d) seq.frames(t, d) = 0.0;
            }
        }
    }
}

void apply_inter_mask(SampleRecord& sample, ModalitySet available) {
    require(!available.empty(), "apply_inter_mask: subset must be non-empty");
    for (Modality m : kModalities) {
        if (available.contains(m)) continue;
        ModalitySequence& seq = sample[m];
        seq.frames.fill(0.0);
        std::fill(seq.mask.begin(), seq.mask.end(), std::uint8_t{0});
    }
}

void drop_frames(SampleRecord& sample, Modality m, const std::vector<std::size_t>& frames) {
    ModalitySequence& seq = sample[m];
    for (std::size_t t : frames) {
        require(t < seq.length(), "drop_frames: frame index out of range");
        seq.mask[t] = 0;
        for (std::size_t d = 0; d < seq.dim(); ++d) seq.frames(t, d) = 0.0;
    }
}

Rng mask_rng(std::uint64_t seed, Stream s, std::uint64_t sample_id) {
    return Rng(derive_seed(seed, {stream(s), sample_id}));
}

Dataset masked_copy(const Dataset& data, double p, std::uint64_t seed, Stream s) {
    Dataset out = data;
    for (SampleRecord& sample : out.samples) {
        Rng rng = mask_rng(seed, s, sample.id);
        apply_intra_mask(sample, p, rng);
    }
    return out;
}

Dataset masked_copy(const Dataset& data, ModalitySet available) {
    Dataset out = data;
    for (SampleRecord& sample : out.samples) apply_inter_mask(sample, available);
    return out;
}

// ---------------------------------------------------------------------------------------
// File formats

namespace {

json sequence_to_json(const ModalitySequence& seq) {
    json frames = json::array();
    for (std::size_t t = 0; t < seq.length(); ++t) {
        auto row = seq.frames.row_values(t);
        frames.push_back(std::vector<double>(row.begin(), row.end()));
    }
    std::vector<int> mask(seq.mask.begin(), seq.mask.end());
    return json{{"frames", std::move(frames)}, {"mask", std::move(mask)}};
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

struct LineReader {
    std::ifstream in;
    std::string source;
    std::size_t line_no = 0;

    bool next(json& value) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                value = json::parse(line);
            } catch (const json::exception& e) {
                throw ParseError(source, line_no, std::string("malformed record: ") + e.what());
            }
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string& message) const { throw ParseError(source, line_no, message); }
};

template <class T>
T field(const json& j, const char* key, const LineReader& reader) {
    if (!j.is_object() || !j.contains(key)) reader.fail(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        reader.fail(std::string("field '") + key + "' has the wrong type");
    }
}

ModalitySequence sequence_from_json(const json& j, std::size_t frames, std::size_t dim, const LineReader& reader,
                                    char tag_char) {
    const std::string name(1, tag_char);
    if (!j.is_object() || !j.contains("frames") || !j.contains("mask")) reader.fail("modality '" + name + "' malformed");
    const json& fr = j.at("frames");
    const json& mk = j.at("mask");
    if (!fr.is_array() || fr.size() != frames)
        reader.fail("modality '" + name + "': expected " + std::to_string(frames) + " frames");
    if (!mk.is_array() || mk.size() != frames)
        reader.fail("modality '" + name + "': mask length must be " + std::to_string(frames));
    ModalitySequence seq;
    seq.frames = DenseArray::matrix(frames, dim);
    seq.mask.resize(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const json& row = fr[t];
        if (!row.is_array() || row.size() != dim)
            reader.fail("modality '" + name + "' frame " + std::to_string(t) + ": expected " + std::to_string(dim) +
                        " values");
        bool all_zero = true;
        for (std::size_t d = 0; d < dim; ++d) {
            if (!row[d].is_number()) reader.fail("modality '" + name + "': non-numeric frame value");
            const double v = row[d].get<double>();
            if (!std::isfinite(v)) reader.fail("modality '" + name + "': non-finite frame value");
            seq.frames(t, d) = v;
            all_zero = all_zero && v == 0.0;
        }
        if (!mk[t].is_number_integer() || (mk[t].get<int>() != 0 && mk[t].get<int>() != 1))
            reader.fail("modality '" + name + "': mask bits must be 0 or 1");
        seq.mask[t] = static_cast<std::uint8_t>(mk[t].get<int>());
        if (seq.mask[t] == 0 && !all_zero)
            reader.fail("modality '" + name + "' frame " + std::to_string(t) + ": masked frame is not zero");
        if (seq.mask[t] == 1 && all_zero)
            reader.fail("modality '" + name + "' frame " + std::to_string(t) + ": mask bit set over a zero frame");
    }
    return seq;
}

}  // namespace

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    json header{{"format", "prlf-dataset"},
                {"version", 1},
                {"classes", data.shape.classes},
                {"frames", data.shape.frames},
                {"dims", data.shape.dims},
                {"split", to_string(data.split)},
                {"provenance", data.provenance},
                {"count", data.samples.size()}};
    out << header.dump() << '\n';
    for (const SampleRecord& s : data.samples) {
        json line{{"id", s.id}, {"label", s.label}};
        if (s.score) line["score"] = *s.score;
        for (Modality m : kModalities) line[std::string(1, tag(m))] = sequence_to_json(s[m]);
        out << line.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
    LineReader reader{open_in(path), path.string()};
    json header;
    if (!reader.next(header)) reader.fail("empty dataset file");
    if (!header.is_object() || header.value("format", "") != "prlf-dataset") reader.fail("not a prlf dataset header");
    if (field<int>(header, "version", reader) != 1) reader.fail("unsupported dataset version");

    Dataset data;
    data.shape.classes = field<std::size_t>(header, "classes", reader);
    data.shape.frames = field<std::array<std::size_t, 3>>(header, "frames", reader);
    data.shape.dims = field<std::array<std::size_t, 3>>(header, "dims", reader);
    data.provenance = field<std::string>(header, "provenance", reader);
    try {
        data.split = split_from_string(field<std::string>(header, "split", reader));
    } catch (const ContractViolation& e) {
        reader.fail(e.what());
    }
    const auto count = field<std::size_t>(header, "count", reader);
    if (data.shape.classes < 2) reader.fail("header declares fewer than two classes");

    json line;
    while (data.samples.size() < count) {
        if (!reader.next(line))
            throw ParseError(reader.source, reader.line_no + 1,
                             "truncated file: expected " + std::to_string(count) + " samples, found " +
                                 std::to_string(data.samples.size()));
        SampleRecord s;
        s.id = field<std::uint64_t>(line, "id", reader);
        s.label = field<std::size_t>(line, "label", reader);
        if (s.label >= data.shape.classes)
            reader.fail("label " + std::to_string(s.label) + " outside the header's " +
                        std::to_string(data.shape.classes) + " classes");
        if (line.contains("score")) s.score = field<double>(line, "score", reader);
        for (Modality m : kModalities) {
            const std::string key(1, tag(m));
            if (!line.contains(key)) reader.fail("missing modality '" + key + "'");
            s[m] = sequence_from_json(line.at(key), data.shape.frames[index_of(m)], data.shape.dims[index_of(m)],
                                      reader, tag(m));
        }
        data.samples.push_back(std::move(s));
    }
    if (reader.next(line)) reader.fail("more records than the header's count");
    return data;
}

void save_truth(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    out << json{{"format", "prlf-truth"}, {"version", 1}, {"count", truth.entries.size()}}.dump() << '\n';
    for (const SampleTruth& t : truth.entries)
        out << json{{"id", t.id}, {"informative", std::string(1, tag(t.informative))}, {"key_frames", t.key_frames}}
                   .dump()
            << '\n';
}

GroundTruth load_truth(const std::filesystem::path& path) {
    LineReader reader{open_in(path), path.string()};
    json header;
    if (!reader.next(header) || header.value("format", "") != "prlf-truth") reader.fail("not a prlf truth file");
    const auto count = field<std::size_t>(header, "count", reader);
    GroundTruth truth;
    json line;
    while (truth.entries.size() < count) {
        if (!reader.next(line)) throw ParseError(reader.source, reader.line_no + 1, "truncated truth file");
        SampleTruth t;
        t.id = field<std::uint64_t>(line, "id", reader);
        const auto inf = field<std::string>(line, "informative", reader);
        if (inf.size() != 1) reader.fail("informative modality must be a single tag");
        try {
            t.informative = modality_from_tag(inf[0]);
        } catch (const ContractViolation& e) {
            reader.fail(e.what());
        }
        t.key_frames = field<std::vector<std::size_t>>(line, "key_frames", reader);
        truth.entries.push_back(std::move(t));
    }
    return truth;
}

void save_masks(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out = open_out(path);
    for (const SampleRecord& s : data.samples) {
        json line{{"id", s.id}};
        for (Modality m : kModalities)
            line[std::string(1, tag(m))] = std::vector<int>(s[m].mask.begin(), s[m].mask.end());
        out << line.dump() << '\n';
    }
}

}  // namespace prlf
