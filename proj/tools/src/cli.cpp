#include "prlf_cli/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "prlf/checkpoint.hpp"
#include "prlf/config.hpp"
#include "prlf/error.hpp"
#include "prlf/evalbench.hpp"
#include "prlf/training.hpp"
#include "prlf_cli/manifest.hpp"
#include "prlf_cli/svg_plot.hpp"

namespace fs = std::filesystem;

namespace prlf::cli {
namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::string out = "prlf_out";
    std::string data;
    std::string checkpoint;
    std::string subset;
    std::string ablate;
    std::string split = "test";
    std::uint64_t seed = 0;
    double p = 0.0;
    std::size_t steps = 0;
    std::size_t epochs = 0;
    std::size_t runs = 1;
    std::size_t checkpoint_every = 0;
    std::vector<std::string> set;
    std::vector<std::string> inputs;

    // Options given on the command line or through the environment.
    const CLI::Option* seed_opt = nullptr;
    const CLI::Option* p_opt = nullptr;
    const CLI::Option* steps_opt = nullptr;
    const CLI::Option* epochs_opt = nullptr;
    const CLI::Option* subset_opt = nullptr;
    const CLI::Option* ablate_opt = nullptr;
};

bool given(const CLI::Option* opt) { return opt != nullptr && opt->count() > 0; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Defaults, then the config file, then --set entries, then dedicated flags.
RunConfig resolve(const Options& o, RunConfig config, bool from_checkpoint) {
    if (!o.config.empty()) {
        if (!fs::exists(o.config)) throw UsageError("config file '" + o.config + "' does not exist");
        apply_values(config, read_config_file(o.config));
    }
    for (const std::string& entry : o.set) {
        const auto eq = entry.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + entry + "'");
        apply_value(config, entry.substr(0, eq), entry.substr(eq + 1));
    }
    if (given(o.seed_opt)) {
        if (from_checkpoint) config.eval.seed = o.seed;
        else set_master_seed(config, o.seed);
    }
    if (given(o.p_opt)) config.eval.p = o.p;
    if (given(o.subset_opt)) {
        try {
            config.eval.subset = ModalitySet::parse(o.subset);
        } catch (const ContractViolation&) {
            throw UsageError("--subset expects a non-empty subset of 'lav', got '" + o.subset + "'");
        }
    }
    if (given(o.steps_opt)) config.model.interaction.steps = o.steps;
    if (given(o.epochs_opt)) config.train.epochs = o.epochs;
    validate(config);
    return config;
}

// Model and training settings of a checkpoint are fixed; reject attempts to change them.
void check_frozen_sections(const RunConfig& resolved, const RunConfig& stored, bool regenerating) {
    const KeyValues a = to_key_values(resolved), b = to_key_values(stored);
    for (const auto& [key, value] : a) {
        const bool frozen = key.starts_with("model.") || key.starts_with("train.") ||
                            (regenerating && key.starts_with("data."));
        if (frozen && b.at(key) != value)
            throw UsageError("'" + key + "' is fixed by the checkpoint (" + b.at(key) + "), got " + value);
    }
}

struct Splits {
    Dataset train, val, test;
    std::optional<GroundTruth> test_truth;
    std::vector<fs::path> files;
};

Dataset load_split(const fs::path& dir, const std::string& name, std::vector<fs::path>& files) {
    const fs::path path = dir / (name + ".jsonl");
    if (!fs::exists(path)) throw UsageError("dataset file '" + path.string() + "' does not exist");
    files.push_back(path);
    return load_dataset(path);
}

Splits obtain_data(const Options& o, RunConfig& config, std::initializer_list<const char*> needed) {
    Splits s;
    if (o.data.empty()) {
        DatasetSplits d = split_dataset(generate(config.data), config.train_fraction, config.val_fraction);
        s.train = std::move(d.train);
        s.val = std::move(d.val);
        s.test = std::move(d.test);
        s.test_truth = std::move(d.test_truth);
        return s;
    }
    const fs::path dir(o.data);
    if (!fs::is_directory(dir)) throw UsageError("data directory '" + o.data + "' does not exist");
    std::optional<DatasetShape> shape;
    for (const char* name : needed) {
        Dataset d = load_split(dir, name, s.files);
        if (shape && (shape->frames != d.shape.frames || shape->dims != d.shape.dims || shape->classes != d.shape.classes))
            throw UsageError("dataset splits in '" + o.data + "' disagree on shapes");
        shape = d.shape;
        const std::string n = name;
        (n == "train" ? s.train : n == "val" ? s.val : s.test) = std::move(d);
    }
    if (shape) config.data.shape = *shape;
    return s;
}

const Dataset& pick_split(const Splits& s, const std::string& name) {
    if (name == "train") return s.train;
    if (name == "val") return s.val;
    if (name == "test") return s.test;
    throw UsageError("--split expects train, val or test, got '" + name + "'");
}

fs::path prepare_out(const Options& o) {
    const fs::path out(o.out);
    fs::create_directories(out);
    return out;
}

nlohmann::json triple_json(const Triple& t) { return nlohmann::json::array({t[0], t[1], t[2]}); }

nlohmann::json mu_json(const Evaluation& ev) {
    return {{"order", "v,a,l"},
            {"mean", triple_json(ev.mean_mu)},
            {"min", triple_json(ev.min_mu)},
            {"max", triple_json(ev.max_mu)},
            {"dominant_counts", {ev.dominant_counts[0], ev.dominant_counts[1], ev.dominant_counts[2]}}};
}

nlohmann::json row_json(const SweepRow& r) {
    nlohmann::json j{{"condition", r.condition}, {"rate", r.rate},         {"subset", r.subset},
                     {"samples", r.samples},     {"mask_seeds", r.mask_seeds}, {"f1_mean", r.f1_mean},
                     {"f1_std", r.f1_std},       {"acc_mean", r.acc_mean}, {"acc_std", r.acc_std}};
    if (r.mae_mean) j["mae_mean"] = *r.mae_mean;
    return j;
}

void write_table(const fs::path& path, const std::vector<SweepRow>& rows, RunManifest& manifest) {
    std::ofstream out(path);
    write_sweep_table(out, rows);
    out.close();
    manifest.add_output(path);
    nlohmann::json j = nlohmann::json::array();
    for (const SweepRow& r : rows) j.push_back(row_json(r));
    manifest.metrics()["rows"] = j;
}

void print_rows(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "condition\tf1\tf1_std\tacc\tacc_std\n";
    for (const SweepRow& r : rows)
        out << r.condition << '\t' << fmt(r.f1_mean) << '\t' << fmt(r.f1_std) << '\t' << fmt(r.acc_mean) << '\t'
            << fmt(r.acc_std) << '\n';
}

struct Loaded {
    Checkpoint checkpoint;
    RunConfig config;
    FrozenModel frozen;
    Splits data;
};

Loaded load_for_eval(const Options& o, std::initializer_list<const char*> needed) {
    if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
    if (!fs::exists(o.checkpoint)) throw UsageError("checkpoint '" + o.checkpoint + "' does not exist");
    Checkpoint ck = load_checkpoint(o.checkpoint);
    RunConfig config = resolve(o, ck.config, true);
    check_frozen_sections(config, ck.config, o.data.empty());
    Splits data = obtain_data(o, config, needed);
    Model model(model_config(ck.config), ck.params);
    return Loaded{std::move(ck), config, FrozenModel{std::move(model), {}}, std::move(data)};
}

int cmd_gen_data(const Options& o, std::ostream& out) {
    RunConfig config = resolve(o, RunConfig{}, false);
    const fs::path dir = prepare_out(o);
    RunManifest manifest("gen-data", config, dir);
    const SynthDataset all = generate(config.data);
    const DatasetSplits splits = split_dataset(all, config.train_fraction, config.val_fraction);
    const std::pair<const Dataset*, const GroundTruth*> parts[] = {
        {&splits.train, &splits.train_truth}, {&splits.val, &splits.val_truth}, {&splits.test, &splits.test_truth}};
    for (const auto& [data, truth] : parts) {
        const std::string name = to_string(data->split);
        save_dataset(*data, dir / (name + ".jsonl"));
        save_truth(*truth, dir / (name + ".truth.jsonl"));
        manifest.add_output(dir / (name + ".jsonl"));
        manifest.add_output(dir / (name + ".truth.jsonl"));
        manifest.metrics()[name + "_samples"] = data->samples.size();
    }
    std::vector<std::size_t> class_counts(config.data.shape.classes, 0);
    for (const SampleRecord& s : all.data.samples) ++class_counts[s.label];
    Triple informative{};
    for (const SampleTruth& t : all.truth.entries) informative[index_of(t.informative)] += 1.0;
    manifest.metrics()["class_counts"] = class_counts;
    manifest.metrics()["informative_counts"] = triple_json(informative);
    manifest.write();
    out << "wrote " << splits.train.samples.size() << "/" << splits.val.samples.size() << "/"
        << splits.test.samples.size() << " train/val/test samples to " << dir.string() << '\n';
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    RunConfig config = resolve(o, RunConfig{}, false);
    if (given(o.ablate_opt)) apply_ablation(config, o.ablate);
    Splits data = obtain_data(o, config, {"train", "val"});
    validate(config);
    const fs::path dir = prepare_out(o);
    RunManifest manifest("train", config, dir);
    for (const fs::path& f : data.files) manifest.add_input(f);

    Model model(model_config(config), init_seed(config));
    Trainer trainer(model, config.train);
    const fs::path log_path = dir / "loss_log.tsv";
    std::ofstream log(log_path);
    log << "epoch\tmask_seed\ttotal\ttask\tuni\tphase\ttrain_acc\tval_f1\tval_acc\tw_v\tw_a\tw_l\tmu_v\tmu_a\tmu_l\n";
    manifest.add_output(log_path);

    std::optional<Evaluation> last_val;
    nlohmann::json history = nlohmann::json::array();
    trainer.fit(data.train, [&](const EpochStats& s) {
        const Triple w = trainer.inference_weight();
        std::optional<Evaluation> val;
        if (!data.val.samples.empty()) val = evaluate(FrozenModel{model, w}, data.val, config.eval.f1);
        log << s.epoch << '\t' << s.mask_seed << '\t' << full(s.loss.total) << '\t' << full(s.loss.task) << '\t'
            << full(s.loss.uni) << '\t' << full(s.loss.phase) << '\t' << full(s.train_accuracy) << '\t'
            << (val ? full(val->metrics.f1) : "-") << '\t' << (val ? full(val->metrics.accuracy) : "-");
        for (double v : w) log << '\t' << full(v);
        for (double v : s.mean_mu) log << '\t' << full(v);
        log << '\n';
        out << "epoch " << s.epoch << "  loss " << fmt(s.loss.total) << "  task " << fmt(s.loss.task) << "  uni "
            << fmt(s.loss.uni) << "  phase " << fmt(s.loss.phase) << "  train_acc " << fmt(s.train_accuracy);
        if (val) out << "  val_f1 " << fmt(val->metrics.f1) << "  val_acc " << fmt(val->metrics.accuracy);
        out << '\n';
        history.push_back({{"epoch", s.epoch}, {"mask_seed", s.mask_seed}, {"loss", s.loss.total}});
        if (o.checkpoint_every > 0 && (s.epoch + 1) % o.checkpoint_every == 0) {
            const fs::path p = dir / ("checkpoint_epoch" + std::to_string(s.epoch + 1) + ".bin");
            save_checkpoint(make_checkpoint(config, model, trainer), p);
            manifest.add_output(p);
        }
        last_val = std::move(val);
    });
    log.close();

    const fs::path ck_path = dir / "checkpoint.bin";
    const Checkpoint ck = make_checkpoint(config, model, trainer);
    save_checkpoint(ck, ck_path);
    manifest.add_output(ck_path);
    manifest.metrics()["epochs"] = history;
    manifest.metrics()["frozen_w"] = triple_json(ck.frozen_w);
    if (last_val) {
        manifest.metrics()["val_f1"] = last_val->metrics.f1;
        manifest.metrics()["val_acc"] = last_val->metrics.accuracy;
        manifest.metrics()["mu"] = mu_json(*last_val);
    }
    manifest.write();
    out << "checkpoint " << ck_path.string() << '\n';
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    Loaded l = load_for_eval(o, {o.split.c_str()});
    l.frozen.w = l.checkpoint.frozen_w;
    const Dataset& data = pick_split(l.data, o.split);
    if (data.samples.empty()) throw UsageError("split '" + o.split + "' is empty");
    const fs::path dir = prepare_out(o);
    RunManifest manifest("eval", l.config, dir);
    manifest.add_input(o.checkpoint);
    for (const fs::path& f : l.data.files) manifest.add_input(f);

    SweepRow row = sweep_condition(l.frozen, data, l.config.eval.subset, l.config.eval.p, l.config.eval.seed,
                                   l.config.eval.p == 0.0 ? 1 : l.config.eval.seeds, l.config.eval.f1);
    const Dataset restricted = masked_copy(data, l.config.eval.subset);
    const Dataset shown = l.config.eval.p == 0.0
                              ? restricted
                              : masked_copy(restricted, l.config.eval.p, row.mask_seeds.front(), Stream::eval_mask);
    const Evaluation ev = evaluate(l.frozen, shown, l.config.eval.f1);
    write_table(dir / "eval.tsv", {row}, manifest);
    manifest.metrics()["split"] = o.split;
    manifest.metrics()["mu"] = mu_json(ev);
    manifest.write();
    out << "split\tsubset\tp\tf1\tacc\tsamples\n"
        << o.split << '\t' << row.subset << '\t' << row.rate << '\t' << full(row.f1_mean) << '\t'
        << full(row.acc_mean) << '\t' << row.samples << '\n';
    return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, bool intra) {
    Loaded l = load_for_eval(o, {o.split.c_str()});
    l.frozen.w = l.checkpoint.frozen_w;
    const Dataset& data = pick_split(l.data, o.split);
    if (data.samples.empty()) throw UsageError("split '" + o.split + "' is empty");
    const std::string name = intra ? "sweep-intra" : "sweep-inter";
    const fs::path dir = prepare_out(o);
    RunManifest manifest(name, l.config, dir);
    manifest.add_input(o.checkpoint);
    for (const fs::path& f : l.data.files) manifest.add_input(f);
    const EvalConfig& e = l.config.eval;
    const std::vector<SweepRow> rows = intra ? sweep_intra(l.frozen, data, e.rates, e.seed, e.seeds, e.f1)
                                             : sweep_inter(l.frozen, data, e.seed, e.seeds, e.p, e.f1);
    write_table(dir / (intra ? "sweep_intra.tsv" : "sweep_inter.tsv"), rows, manifest);
    manifest.write();
    print_rows(out, rows);
    return kExitOk;
}

int cmd_phase_diag(const Options& o, std::ostream& out) {
    Loaded l = load_for_eval(o, {o.split.c_str()});
    l.frozen.w = l.checkpoint.frozen_w;
    const Dataset& data = pick_split(l.data, o.split);
    if (data.samples.empty()) throw UsageError("split '" + o.split + "' is empty");
    const fs::path dir = prepare_out(o);
    RunManifest manifest("phase-diag", l.config, dir);
    manifest.add_input(o.checkpoint);
    for (const fs::path& f : l.data.files) manifest.add_input(f);

    const fs::path path = dir / "phase.tsv";
    std::ofstream table(path);
    table << "rate\tmask_seed\tmean_degrees\tcounted\tskipped\n";
    out << "rate\tmean_degrees\n";
    nlohmann::json rows = nlohmann::json::array();
    for (double p : l.config.eval.phase_rates) {
        const PhaseResult r = phase_difference(l.frozen, data, p, eval_mask_seed(l.config.eval.seed, 0));
        table << full(r.rate) << '\t' << r.mask_seed << '\t' << full(r.mean_degrees) << '\t' << r.counted << '\t'
              << r.skipped << '\n';
        out << r.rate << '\t' << fmt(r.mean_degrees) << '\n';
        rows.push_back({{"rate", r.rate}, {"mask_seed", r.mask_seed}, {"mean_degrees", r.mean_degrees},
                        {"counted", r.counted}, {"skipped", r.skipped}});
    }
    table.close();
    manifest.add_output(path);
    const double cos = mean_abs_projection_cosine(l.frozen, data);
    manifest.metrics()["phase"] = rows;
    manifest.metrics()["mean_abs_cos_proj_res"] = cos;
    manifest.write();
    out << "mean |cos(proj, res)|\t" << fmt(cos) << '\n';
    return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
    RunConfig config = resolve(o, RunConfig{}, false);
    Splits data = obtain_data(o, config, {"train", "test"});
    validate(config);

    std::vector<std::pair<std::string, RunConfig>> variants{{"full", config}};
    const std::string what = given(o.ablate_opt) ? o.ablate : "all";
    if (what == "steps") {
        variants.clear();
        for (std::size_t steps = 1; steps <= 5; ++steps) {
            RunConfig c = config;
            c.model.interaction.steps = steps;
            variants.emplace_back("steps=" + std::to_string(steps), c);
        }
    } else {
        const std::vector<std::string> names =
            what == "all" ? ablation_names() : std::vector<std::string>{what};
        for (const std::string& name : names) {
            RunConfig c = config;
            apply_ablation(c, name);
            variants.emplace_back(name, c);
        }
    }
    if (o.runs < 1) throw UsageError("--runs must be >= 1");

    const fs::path dir = prepare_out(o);
    RunManifest manifest("ablate", config, dir);
    for (const fs::path& f : data.files) manifest.add_input(f);
    const fs::path path = dir / "ablation.tsv";
    std::ofstream table(path);
    table << "variant\truns\tp\tf1_mean\tf1_std\tacc_mean\tacc_std\tmu_v\tmu_a\tmu_l\n";
    out << "variant\tf1\tf1_std\tacc\n";
    nlohmann::json results = nlohmann::json::object();
    for (const auto& [name, vc] : variants) {
        std::vector<double> f1, acc;
        nlohmann::json runs = nlohmann::json::array();
        Triple mu{};
        for (std::size_t r = 0; r < o.runs; ++r) {
            RunConfig rc = vc;
            rc.train.seed = vc.train.seed + r;
            Model model(model_config(rc), init_seed(rc));
            Trainer trainer(model, rc.train);
            trainer.fit(data.train);
            const FrozenModel frozen{model, trainer.inference_weight()};
            const SweepRow row = sweep_condition(frozen, data.test, rc.eval.subset, rc.eval.p, rc.eval.seed,
                                                 rc.eval.p == 0.0 ? 1 : rc.eval.seeds, rc.eval.f1);
            const Dataset shown =
                rc.eval.p == 0.0 ? masked_copy(data.test, rc.eval.subset)
                                 : masked_copy(masked_copy(data.test, rc.eval.subset), rc.eval.p,
                                               row.mask_seeds.front(), Stream::eval_mask);
            const Evaluation ev = evaluate(frozen, shown, rc.eval.f1);
            f1.push_back(row.f1_mean);
            acc.push_back(row.acc_mean);
            for (std::size_t m = 0; m < 3; ++m) mu[m] += ev.mean_mu[m] / static_cast<double>(o.runs);
            runs.push_back({{"train_seed", rc.train.seed}, {"f1", row.f1_mean}, {"acc", row.acc_mean},
                            {"mu", mu_json(ev)}});
        }
        auto stats = [](const std::vector<double>& v) {
            double mean = 0.0, var = 0.0;
            for (double x : v) mean += x / static_cast<double>(v.size());
            for (double x : v) var += (x - mean) * (x - mean);
            return std::pair{mean, v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0};
        };
        const auto [f1_mean, f1_std] = stats(f1);
        const auto [acc_mean, acc_std] = stats(acc);
        table << name << '\t' << o.runs << '\t' << full(vc.eval.p) << '\t' << full(f1_mean) << '\t' << full(f1_std)
              << '\t' << full(acc_mean) << '\t' << full(acc_std) << '\t' << full(mu[0]) << '\t' << full(mu[1])
              << '\t' << full(mu[2]) << '\n';
        out << name << '\t' << fmt(f1_mean) << '\t' << fmt(f1_std) << '\t' << fmt(acc_mean) << '\n';
        results[name] = {{"f1_mean", f1_mean}, {"f1_std", f1_std}, {"acc_mean", acc_mean}, {"acc_std", acc_std},
                         {"runs", runs}};
    }
    table.close();
    manifest.add_output(path);
    manifest.metrics()["variants"] = results;
    manifest.write();
    return kExitOk;
}

int cmd_plot(const Options& o, std::ostream& out) {
    if (o.inputs.empty()) throw UsageError("plot expects at least one sweep table");
    RunConfig config = resolve(o, RunConfig{}, false);
    const fs::path dir = prepare_out(o);
    RunManifest manifest("plot", config, dir);
    std::vector<Series> series;
    for (const std::string& input : o.inputs) {
        if (!fs::exists(input)) throw UsageError("sweep table '" + input + "' does not exist");
        manifest.add_input(input);
        std::ifstream in(input);
        Series s;
        s.label = fs::path(input).stem().string();
        for (const SweepRow& r : read_sweep_table(in, input)) {
            if (r.subset != ModalitySet::all().to_string()) continue;
            s.x.push_back(r.rate);
            s.y.push_back(r.f1_mean);
            s.err.push_back(r.f1_std);
        }
        if (s.x.empty()) throw UsageError("'" + input + "' has no intra-rate rows");
        series.push_back(std::move(s));
    }
    const fs::path path = dir / "f1_vs_p.svg";
    std::ofstream svg(path);
    svg << render_svg(series, "F1 under intra-modality missingness", "missing rate p", "F1");
    svg.close();
    manifest.add_output(path);
    manifest.write();
    out << "plot " << path.string() << '\n';
    return kExitOk;
}

void add_common(CLI::App& cmd, Options& o) {
    cmd.add_option("--config", o.config, "INI config file")->envname("PRLF_CONFIG");
    o.seed_opt = cmd.add_option("--seed", o.seed, "master seed")->envname("PRLF_SEED");
    cmd.add_option("--out", o.out, "output directory")->envname("PRLF_OUT")->capture_default_str();
    o.p_opt = cmd.add_option("--p", o.p, "intra-modality missing rate")->envname("PRLF_P")->check(CLI::Range(0.0, 1.0));
    o.subset_opt = cmd.add_option("--subset", o.subset, "available modalities, e.g. 'la'")->envname("PRLF_SUBSET");
    o.steps_opt = cmd.add_option("--steps", o.steps, "interaction iterations")->envname("PRLF_STEPS");
    o.epochs_opt = cmd.add_option("--epochs", o.epochs, "training epochs")->envname("PRLF_EPOCHS");
    cmd.add_option("--set", o.set, "config override section.key=value (repeatable)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"prlf: reliability-routed progressive fusion for missing-modality learning"};
    app.require_subcommand(1);
    Options o;

    CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    CLI::App* train = app.add_subcommand("train", "train a model and write checkpoints");
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on one condition");
    CLI::App* intra = app.add_subcommand("sweep-intra", "F1 over intra-modality missing rates");
    CLI::App* inter = app.add_subcommand("sweep-inter", "F1 over available-modality subsets");
    CLI::App* ablate = app.add_subcommand("ablate", "train and compare ablated variants");
    CLI::App* phase = app.add_subcommand("phase-diag", "phase-difference and projection diagnostics");
    CLI::App* plot = app.add_subcommand("plot", "render F1-vs-p curves from sweep tables as SVG");
    for (CLI::App* c : {gen, train, eval, intra, inter, ablate, phase, plot}) add_common(*c, o);
    for (CLI::App* c : {train, eval, intra, inter, ablate, phase})
        c->add_option("--data", o.data, "dataset directory written by gen-data")->envname("PRLF_DATA");
    for (CLI::App* c : {eval, intra, inter, phase}) {
        c->add_option("--checkpoint", o.checkpoint, "checkpoint file")->envname("PRLF_CHECKPOINT");
        c->add_option("--split", o.split, "train, val or test")->capture_default_str();
    }
    for (CLI::App* c : {train, ablate})
        o.ablate_opt = c->add_option("--ablate", o.ablate,
                                     "wo-cmi, wo-fimi, wo-amre, wo-pi, wo-luni, wo-lphase (ablate also: all, steps)")
                           ->envname("PRLF_ABLATE");
    train->add_option("--checkpoint-every", o.checkpoint_every, "also save every N epochs");
    ablate->add_option("--runs", o.runs, "training seeds per variant")->capture_default_str();
    plot->add_option("inputs", o.inputs, "sweep_intra.tsv files");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "prlf: usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    // Only one subcommand parsed, so the shared ablate option pointer must follow it.
    if (ablate->parsed()) o.ablate_opt = ablate->get_option("--ablate");
    if (train->parsed()) o.ablate_opt = train->get_option("--ablate");
    CLI::App* cmd = app.get_subcommands().front();
    for (const auto& [ptr, name] : {std::pair{&o.seed_opt, "--seed"}, {&o.p_opt, "--p"}, {&o.subset_opt, "--subset"},
                                    {&o.steps_opt, "--steps"}, {&o.epochs_opt, "--epochs"}})
        *ptr = cmd->get_option(name);

    try {
        if (gen->parsed()) return cmd_gen_data(o, out);
        if (train->parsed()) return cmd_train(o, out);
        if (eval->parsed()) return cmd_eval(o, out);
        if (intra->parsed()) return cmd_sweep(o, out, true);
        if (inter->parsed()) return cmd_sweep(o, out, false);
        if (ablate->parsed()) return cmd_ablate(o, out);
        if (phase->parsed()) return cmd_phase_diag(o, out);
        if (plot->parsed()) return cmd_plot(o, out);
    } catch (const UsageError& e) {
        err << "prlf: usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "prlf: config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "prlf: input error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "prlf: error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace prlf::cli
