#include "prlf/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "prlf/error.hpp"

namespace prlf {
namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += format_double(values[i]);
    }
    return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    throw ConfigError("config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                      std::string(expected));
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_double(std::string_view key, std::string_view value) {
    const std::string_view v = trim(value);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, value, "a number");
    return out;
}

std::uint64_t parse_uint(std::string_view key, std::string_view value) {
    const std::string_view v = trim(value);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) bad_value(key, value, "a non-negative integer");
    return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
    const std::string_view v = trim(value);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, value, "a boolean");
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
    std::vector<double> out;
    std::string_view rest = trim(value);
    if (rest.empty()) return out;
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(parse_double(key, rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view key, std::string_view value, const std::pair<const char*, Enum> (&table)[N]) {
    const std::string_view v = trim(value);
    for (const auto& [name, e] : table)
        if (v == name) return e;
    std::string expected = "one of";
    for (const auto& [name, e] : table) expected += std::string(" ") + name;
    bad_value(key, value, expected);
}

template <typename Enum, std::size_t N>
std::string enum_name(Enum e, const std::pair<const char*, Enum> (&table)[N]) {
    for (const auto& [name, v] : table)
        if (v == e) return name;
    throw ContractViolation("unnamed enum value");
}

constexpr std::pair<const char*, RoutingMode> kRouting[] = {{"full", RoutingMode::full},
                                                            {"confidence_only", RoutingMode::confidence_only},
                                                            {"fisher_only", RoutingMode::fisher_only},
                                                            {"uniform", RoutingMode::uniform}};
constexpr std::pair<const char*, FusionMode> kFusion[] = {{"elementwise", FusionMode::elementwise},
                                                          {"scalar", FusionMode::scalar}};
constexpr std::pair<const char*, GateMode> kGate[] = {{"pooled", GateMode::pooled}, {"token", GateMode::token}};
constexpr std::pair<const char*, FisherTarget> kTarget[] = {{"logit", FisherTarget::logit},
                                                            {"log_likelihood", FisherTarget::log_likelihood}};
constexpr std::pair<const char*, OptimizerKind> kOptimizer[] = {{"sgd_momentum", OptimizerKind::sgd_momentum},
                                                                {"adam", OptimizerKind::adam}};
constexpr std::pair<const char*, F1Mode> kF1[] = {{"binary", F1Mode::binary}, {"weighted", F1Mode::weighted}};

struct Field {
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
};

template <typename T>
Field size_field(T RunConfig::*section, std::size_t T::*member) {
    return {[=](const RunConfig& c) { return std::to_string(c.*section.*member); },
            [=](RunConfig& c, std::string_view k, std::string_view v) {
                c.*section.*member = static_cast<std::size_t>(parse_uint(k, v));
            }};
}

template <typename T>
Field seed_field(T RunConfig::*section, std::uint64_t T::*member) {
    return {[=](const RunConfig& c) { return std::to_string(c.*section.*member); },
            [=](RunConfig& c, std::string_view k, std::string_view v) { c.*section.*member = parse_uint(k, v); }};
}

template <typename T>
Field double_field(T RunConfig::*section, double T::*member) {
    return {[=](const RunConfig& c) { return format_double(c.*section.*member); },
            [=](RunConfig& c, std::string_view k, std::string_view v) { c.*section.*member = parse_double(k, v); }};
}

template <typename T>
Field bool_field(T RunConfig::*section, bool T::*member) {
    return {[=](const RunConfig& c) { return std::string(c.*section.*member ? "true" : "false"); },
            [=](RunConfig& c, std::string_view k, std::string_view v) { c.*section.*member = parse_bool(k, v); }};
}

template <typename T, typename Enum, std::size_t N>
Field enum_field(T RunConfig::*section, Enum T::*member, const std::pair<const char*, Enum> (&table)[N]) {
    return {[=, &table](const RunConfig& c) { return enum_name(c.*section.*member, table); },
            [=, &table](RunConfig& c, std::string_view k, std::string_view v) {
                c.*section.*member = parse_enum(k, v, table);
            }};
}

Field run_double(double RunConfig::*member) {
    return {[=](const RunConfig& c) { return format_double(c.*member); },
            [=](RunConfig& c, std::string_view k, std::string_view v) { c.*member = parse_double(k, v); }};
}

template <typename Get, typename Set>
Field custom(Get get, Set set) {
    return {get, set};
}

const std::map<std::string, Field, std::less<>>& fields() {
    static const std::map<std::string, Field, std::less<>> table = [] {
        std::map<std::string, Field, std::less<>> f;
        using R = RunConfig;
        // [data]
        f["data.samples"] = size_field(&R::data, &SynthConfig::samples);
        f["data.noise"] = double_field(&R::data, &SynthConfig::noise);
        f["data.amplitude_factor"] = double_field(&R::data, &SynthConfig::amplitude_factor);
        f["data.key_frames"] = size_field(&R::data, &SynthConfig::key_frames);
        f["data.seed"] = seed_field(&R::data, &SynthConfig::seed);
        f["data.train_fraction"] = run_double(&R::train_fraction);
        f["data.val_fraction"] = run_double(&R::val_fraction);
        f["data.classes"] = custom([](const R& c) { return std::to_string(c.data.shape.classes); },
                                   [](R& c, std::string_view k, std::string_view v) {
                                       c.data.shape.classes = static_cast<std::size_t>(parse_uint(k, v));
                                   });
        for (Modality m : kModalities) {
            const std::size_t mi = index_of(m);
            const std::string t(1, tag(m));
            f["data.frames_" + t] = custom([mi](const R& c) { return std::to_string(c.data.shape.frames[mi]); },
                                           [mi](R& c, std::string_view k, std::string_view v) {
                                               c.data.shape.frames[mi] = static_cast<std::size_t>(parse_uint(k, v));
                                           });
            f["data.dim_" + t] = custom([mi](const R& c) { return std::to_string(c.data.shape.dims[mi]); },
                                        [mi](R& c, std::string_view k, std::string_view v) {
                                            c.data.shape.dims[mi] = static_cast<std::size_t>(parse_uint(k, v));
                                        });
            f["data.mix_" + t] = custom([mi](const R& c) { return format_double(c.data.informative_mix[mi]); },
                                        [mi](R& c, std::string_view k, std::string_view v) {
                                            c.data.informative_mix[mi] = parse_double(k, v);
                                        });
        }
        // [model]
        f["model.tokens"] = size_field(&R::model, &ModelConfig::tokens);
        f["model.width"] = size_field(&R::model, &ModelConfig::width);
        f["model.routing"] = enum_field(&R::model, &ModelConfig::routing, kRouting);
        f["model.fusion"] = enum_field(&R::model, &ModelConfig::fusion, kFusion);
        f["model.fisher_target"] = enum_field(&R::model, &ModelConfig::fisher_target, kTarget);
        f["model.shared_decomposer"] = bool_field(&R::model, &ModelConfig::shared_decomposer);
        f["model.steps"] = custom([](const R& c) { return std::to_string(c.model.interaction.steps); },
                                  [](R& c, std::string_view k, std::string_view v) {
                                      c.model.interaction.steps = static_cast<std::size_t>(parse_uint(k, v));
                                  });
        f["model.gamma"] = custom([](const R& c) { return format_double(c.model.interaction.gamma); },
                                  [](R& c, std::string_view k, std::string_view v) {
                                      c.model.interaction.gamma = parse_double(k, v);
                                  });
        f["model.refine_dropout"] = custom([](const R& c) { return format_double(c.model.interaction.refine_dropout); },
                                           [](R& c, std::string_view k, std::string_view v) {
                                               c.model.interaction.refine_dropout = parse_double(k, v);
                                           });
        f["model.denoise_dropout"] =
            custom([](const R& c) { return format_double(c.model.interaction.denoise_dropout); },
                   [](R& c, std::string_view k, std::string_view v) {
                       c.model.interaction.denoise_dropout = parse_double(k, v);
                   });
        f["model.gate"] = custom([](const R& c) { return enum_name(c.model.interaction.gate, kGate); },
                                 [](R& c, std::string_view k, std::string_view v) {
                                     c.model.interaction.gate = parse_enum(k, v, kGate);
                                 });
        f["model.cross_path"] = custom([](const R& c) { return std::string(c.model.interaction.cross_path ? "true" : "false"); },
                                       [](R& c, std::string_view k, std::string_view v) {
                                           c.model.interaction.cross_path = parse_bool(k, v);
                                       });
        // [train]
        f["train.eta1"] = double_field(&R::train, &TrainConfig::eta1);
        f["train.eta2"] = double_field(&R::train, &TrainConfig::eta2);
        f["train.learning_rate"] = double_field(&R::train, &TrainConfig::learning_rate);
        f["train.momentum"] = double_field(&R::train, &TrainConfig::momentum);
        f["train.clip_norm"] = double_field(&R::train, &TrainConfig::clip_norm);
        f["train.optimizer"] = enum_field(&R::train, &TrainConfig::optimizer, kOptimizer);
        f["train.epochs"] = size_field(&R::train, &TrainConfig::epochs);
        f["train.batch_size"] = size_field(&R::train, &TrainConfig::batch_size);
        f["train.missing_rate"] = double_field(&R::train, &TrainConfig::missing_rate);
        f["train.seed"] = seed_field(&R::train, &TrainConfig::seed);
        // [eval]
        f["eval.seeds"] = size_field(&R::eval, &EvalConfig::seeds);
        f["eval.seed"] = seed_field(&R::eval, &EvalConfig::seed);
        f["eval.p"] = double_field(&R::eval, &EvalConfig::p);
        f["eval.f1"] = enum_field(&R::eval, &EvalConfig::f1, kF1);
        f["eval.rates"] = custom([](const R& c) { return format_list(c.eval.rates); },
                                 [](R& c, std::string_view k, std::string_view v) { c.eval.rates = parse_list(k, v); });
        f["eval.phase_rates"] = custom([](const R& c) { return format_list(c.eval.phase_rates); },
                                       [](R& c, std::string_view k, std::string_view v) {
                                           c.eval.phase_rates = parse_list(k, v);
                                       });
        f["eval.subset"] = custom([](const R& c) { return c.eval.subset.to_string(); },
                                  [](R& c, std::string_view k, std::string_view v) {
                                      try {
                                          c.eval.subset = ModalitySet::parse(trim(v));
                                      } catch (const ContractViolation&) {
                                          bad_value(k, v, "a subset of 'lav'");
                                      }
                                  });
        return f;
    }();
    return table;
}

void check(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

KeyValues to_key_values(const RunConfig& config) {
    KeyValues out;
    for (const auto& [key, field] : fields()) out.emplace(key, field.get(config));
    return out;
}

void apply_value(RunConfig& config, std::string_view key, std::string_view value) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
    it->second.set(config, key, value);
}

void apply_values(RunConfig& config, const KeyValues& values) {
    for (const auto& [key, value] : values) apply_value(config, key, value);
}

void validate(const RunConfig& c) {
    check(c.data.samples >= 1, "data.samples must be >= 1");
    check(c.data.noise > 0.0, "data.noise must be > 0");
    check(c.data.amplitude_factor >= 0.0, "data.amplitude_factor must be >= 0");
    check(c.data.shape.classes >= 2, "data.classes must be >= 2");
    for (std::size_t m = 0; m < 3; ++m) {
        check(c.data.shape.frames[m] >= 1 && c.data.shape.dims[m] >= 1, "data frames and dims must be >= 1");
        check(c.data.key_frames <= c.data.shape.frames[m], "data.key_frames must not exceed any frame count");
        check(c.data.informative_mix[m] >= 0.0, "data.mix_* must be >= 0");
    }
    check(c.data.informative_mix[0] + c.data.informative_mix[1] + c.data.informative_mix[2] > 0.0,
          "data.mix_* must not all be zero");
    check(c.train_fraction > 0.0 && c.val_fraction >= 0.0 && c.train_fraction + c.val_fraction < 1.0,
          "data.train_fraction and data.val_fraction must leave a non-empty test split");
    check(c.model.tokens >= 1 && c.model.width >= 1, "model.tokens and model.width must be >= 1");
    for (std::size_t m = 0; m < 3; ++m)
        check(c.model.tokens <= c.data.shape.frames[m], "model.tokens must not exceed any frame count");
    check(c.model.interaction.steps >= 1, "model.steps must be >= 1");
    check(c.model.interaction.gamma >= 0.0 && c.model.interaction.gamma <= 1.0, "model.gamma must lie in [0, 1]");
    check(c.model.interaction.refine_dropout >= 0.0 && c.model.interaction.refine_dropout < 1.0,
          "model.refine_dropout must lie in [0, 1)");
    check(c.model.interaction.denoise_dropout >= 0.0 && c.model.interaction.denoise_dropout < 1.0,
          "model.denoise_dropout must lie in [0, 1)");
    check(c.train.eta1 >= 0.0 && c.train.eta2 >= 0.0, "train.eta1 and train.eta2 must be >= 0");
    check(c.train.learning_rate > 0.0, "train.learning_rate must be > 0");
    check(c.train.momentum >= 0.0 && c.train.momentum < 1.0, "train.momentum must lie in [0, 1)");
    check(c.train.clip_norm >= 0.0, "train.clip_norm must be >= 0");
    check(c.train.batch_size >= 1, "train.batch_size must be >= 1");
    check(c.train.missing_rate >= 0.0 && c.train.missing_rate <= 1.0, "train.missing_rate must lie in [0, 1]");
    check(c.eval.seeds >= 1, "eval.seeds must be >= 1");
    check(c.eval.p >= 0.0 && c.eval.p <= 1.0, "eval.p must lie in [0, 1]");
    check(!c.eval.subset.empty(), "eval.subset must not be empty");
    for (double r : c.eval.rates) check(r >= 0.0 && r <= 1.0, "eval.rates must lie in [0, 1]");
    for (double r : c.eval.phase_rates) check(r >= 0.0 && r <= 1.0, "eval.phase_rates must lie in [0, 1]");
}

KeyValues parse_config_text(const std::string& text, const std::string& source) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    KeyValues out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError(source + ": key '" + section + "' is outside a section");
        for (const auto& [key, value] : body) {
            const std::string full = section + "." + key;
            if (!fields().contains(full)) throw ConfigError(source + ": unknown config key '" + full + "'");
            out[full] = value.data();
        }
    }
    return out;
}

KeyValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path.string());
}

std::string render_config(const RunConfig& config) {
    std::string out;
    std::string section;
    for (const auto& [key, value] : to_key_values(config)) {
        const auto dot = key.find('.');
        const std::string s = key.substr(0, dot);
        if (s != section) {
            if (!section.empty()) out += '\n';
            out += "[" + s + "]\n";
            section = s;
        }
        out += key.substr(dot + 1) + " = " + value + "\n";
    }
    return out;
}

const std::vector<std::string>& ablation_names() {
    static const std::vector<std::string> names{"wo-cmi", "wo-fimi", "wo-amre", "wo-pi", "wo-luni", "wo-lphase"};
    return names;
}

void apply_ablation(RunConfig& config, std::string_view name) {
    if (name == "wo-cmi") {
        config.model.routing = RoutingMode::fisher_only;
    } else if (name == "wo-fimi") {
        config.model.routing = RoutingMode::confidence_only;
    } else if (name == "wo-amre") {
        config.model.routing = RoutingMode::uniform;
    } else if (name == "wo-pi") {
        config.model.interaction.steps = 1;
        config.model.interaction.cross_path = false;
    } else if (name == "wo-luni") {
        config.train.eta1 = 0.0;
    } else if (name == "wo-lphase") {
        config.train.eta2 = 0.0;
    } else {
        throw ConfigError("unknown ablation '" + std::string(name) +
                          "' (expected wo-cmi, wo-fimi, wo-amre, wo-pi, wo-luni or wo-lphase)");
    }
}

void set_master_seed(RunConfig& config, std::uint64_t seed) {
    config.data.seed = seed;
    config.train.seed = seed;
    config.eval.seed = seed;
}

ModelConfig model_config(const RunConfig& config) {
    ModelConfig m = config.model;
    m.shape = config.data.shape;
    return m;
}

std::uint64_t init_seed(const RunConfig& config) {
    return derive_seed(config.train.seed, {stream(Stream::init)});
}

std::string to_string(RoutingMode mode) { return enum_name(mode, kRouting); }
std::string to_string(FusionMode mode) { return enum_name(mode, kFusion); }
std::string to_string(GateMode mode) { return enum_name(mode, kGate); }
std::string to_string(FisherTarget target) { return enum_name(target, kTarget); }
std::string to_string(OptimizerKind kind) { return enum_name(kind, kOptimizer); }
std::string to_string(F1Mode mode) { return enum_name(mode, kF1); }

}  // namespace prlf
