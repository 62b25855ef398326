#include "prlf/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "prlf/error.hpp"

namespace prlf {
namespace {

double f1_for(std::span<const std::size_t> predicted, std::span<const std::size_t> labels, std::size_t cls) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predicted[i] == cls, t = labels[i] == cls;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

void mean_std(const std::vector<double>& v, double& mean, double& std) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    std = 0.0;
    if (v.size() > 1) {
        for (double x : v) std += (x - mean) * (x - mean);
        std = std::sqrt(std / static_cast<double>(v.size() - 1));
    }
}

void summarize(SweepRow& row) {
    std::vector<double> f1, acc, mae;
    for (const Metrics& m : row.per_seed) {
        f1.push_back(m.f1);
        acc.push_back(m.accuracy);
        if (m.mae) mae.push_back(*m.mae);
    }
    mean_std(f1, row.f1_mean, row.f1_std);
    mean_std(acc, row.acc_mean, row.acc_std);
    if (!mae.empty() && mae.size() == row.per_seed.size()) {
        double m, s;
        mean_std(mae, m, s);
        row.mae_mean = m;
        row.mae_std = s;
    }
}

std::string rate_label(double p) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "p=%g", p);
    return buf;
}

}  // namespace

SweepRow sweep_condition(const FrozenModel& frozen, const Dataset& data, ModalitySet subset, double rate,
                         std::uint64_t master_seed, std::size_t seeds, F1Mode mode) {
    require(rate >= 0.0 && rate <= 1.0, "sweep: rate must lie in [0, 1]");
    require(seeds >= 1, "sweep: at least one seed is required");
    SweepRow row;
    row.rate = rate;
    row.subset = subset.to_string();
    row.samples = data.samples.size();
    const Dataset restricted = masked_copy(data, subset);
    for (std::size_t k = 0; k < seeds; ++k) {
        const std::uint64_t seed = eval_mask_seed(master_seed, k);
        row.mask_seeds.push_back(seed);
        if (rate == 0.0 && k > 0) {
            row.per_seed.push_back(row.per_seed.front());
            continue;
        }
        const Dataset masked = rate == 0.0 ? restricted : masked_copy(restricted, rate, seed, Stream::eval_mask);
        row.per_seed.push_back(evaluate(frozen, masked, mode).metrics);
    }
    summarize(row);
    row.condition = subset == ModalitySet::all() ? rate_label(rate) : subset.label();
    return row;
}

namespace {

std::string format(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Metrics compute_metrics(std::span<const std::size_t> predicted, std::span<const std::size_t> labels, F1Mode mode,
                        std::span<const double> predicted_scores, std::span<const double> true_scores) {
    require(!labels.empty(), "metrics: empty input");
    require(predicted.size() == labels.size(), "metrics: predictions and labels differ in length");
    Metrics m;
    m.count = labels.size();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) correct += predicted[i] == labels[i];
    m.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    if (mode == F1Mode::binary) {
        m.f1 = f1_for(predicted, labels, 1);
    } else {
        const std::size_t classes = 1 + std::max(*std::max_element(labels.begin(), labels.end()),
                                                 *std::max_element(predicted.begin(), predicted.end()));
        for (std::size_t c = 0; c < classes; ++c) {
            const auto support = static_cast<double>(std::count(labels.begin(), labels.end(), c));
            if (support > 0) m.f1 += support * f1_for(predicted, labels, c);
        }
        m.f1 /= static_cast<double>(labels.size());
    }
    if (!predicted_scores.empty() && !true_scores.empty()) {
        require(predicted_scores.size() == labels.size() && true_scores.size() == labels.size(),
                "metrics: score spans differ in length");
        double sum = 0.0;
        for (std::size_t i = 0; i < labels.size(); ++i) sum += std::abs(predicted_scores[i] - true_scores[i]);
        m.mae = sum / static_cast<double>(labels.size());
    }
    return m;
}

Evaluation evaluate(const FrozenModel& frozen, const Dataset& data, F1Mode mode) {
    require(!data.samples.empty(), "evaluate: empty dataset");
    Evaluation ev;
    std::vector<std::size_t> labels;
    std::vector<double> predicted_scores, true_scores;
    const bool scored = std::all_of(data.samples.begin(), data.samples.end(),
                                    [](const SampleRecord& s) { return s.score.has_value(); });
    for (const SampleRecord& s : data.samples) {
        const Prediction p = predict(frozen.model, s, frozen.w);
        ev.predicted.push_back(p.predicted_class);
        labels.push_back(s.label);
        if (scored) {
            double expected = 0.0;
            for (std::size_t c = 0; c < p.probabilities.size(); ++c) expected += static_cast<double>(c) * p.probabilities[c];
            predicted_scores.push_back(expected);
            true_scores.push_back(*s.score);
        }
        for (std::size_t m = 0; m < 3; ++m) {
            ev.mean_mu[m] += p.importance.mu[m];
            ev.min_mu[m] = std::min(ev.min_mu[m], p.importance.mu[m]);
            ev.max_mu[m] = std::max(ev.max_mu[m], p.importance.mu[m]);
        }
        ++ev.dominant_counts[index_of(p.importance.dominant)];
    }
    for (double& v : ev.mean_mu) v /= static_cast<double>(data.samples.size());
    ev.metrics = compute_metrics(ev.predicted, labels, mode, predicted_scores, true_scores);
    return ev;
}

std::uint64_t eval_mask_seed(std::uint64_t master, std::size_t k) {
    return derive_seed(master, {stream(Stream::eval_mask), k});
}

std::vector<SweepRow> sweep_intra(const FrozenModel& frozen, const Dataset& data, std::span<const double> rates,
                                  std::uint64_t master_seed, std::size_t seeds, F1Mode mode) {
    std::vector<SweepRow> rows;
    for (double p : rates) {
        rows.push_back(sweep_condition(frozen, data, ModalitySet::all(), p, master_seed, seeds, mode));
        rows.back().condition = rate_label(p);
    }
    return rows;
}

std::vector<SweepRow> sweep_inter(const FrozenModel& frozen, const Dataset& data, std::uint64_t master_seed,
                                  std::size_t seeds, double rate, F1Mode mode) {
    std::vector<SweepRow> rows;
    for (ModalitySet subset : evaluation_subsets()) {
        rows.push_back(sweep_condition(frozen, data, subset, rate, master_seed, seeds, mode));
        rows.back().condition = subset.label();
    }
    SweepRow avg;
    avg.condition = "Avg.";
    avg.rate = rate;
    avg.subset = "";
    avg.samples = data.samples.size();
    avg.mask_seeds = rows.front().mask_seeds;
    for (std::size_t k = 0; k < seeds; ++k) {
        Metrics m;
        m.count = data.samples.size();
        bool has_mae = true;
        double mae = 0.0;
        for (const SweepRow& r : rows) {
            if (r.subset == ModalitySet::all().to_string()) continue;
            m.f1 += r.per_seed[k].f1 / 6.0;
            m.accuracy += r.per_seed[k].accuracy / 6.0;
            if (r.per_seed[k].mae) mae += *r.per_seed[k].mae / 6.0;
            else has_mae = false;
        }
        if (has_mae) m.mae = mae;
        avg.per_seed.push_back(m);
    }
    summarize(avg);
    // Table layout: six missing conditions, Avg., then the complete-input column.
    const SweepRow full = rows.back();
    rows.pop_back();
    rows.push_back(avg);
    rows.push_back(full);
    return rows;
}

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows) {
    out << "condition\trate\tsubset\tsamples\tmask_seeds\tf1_mean\tf1_std\tacc_mean\tacc_std\tmae_mean\tmae_std\n";
    for (const SweepRow& r : rows) {
        std::string seeds;
        for (std::size_t i = 0; i < r.mask_seeds.size(); ++i) seeds += (i ? ";" : "") + std::to_string(r.mask_seeds[i]);
        out << r.condition << '\t' << format(r.rate) << '\t' << (r.subset.empty() ? "-" : r.subset) << '\t'
            << r.samples << '\t' << seeds << '\t' << format(r.f1_mean) << '\t' << format(r.f1_std) << '\t'
            << format(r.acc_mean) << '\t' << format(r.acc_std) << '\t' << (r.mae_mean ? format(*r.mae_mean) : "-")
            << '\t' << (r.mae_std ? format(*r.mae_std) : "-") << '\n';
    }
}

std::vector<SweepRow> read_sweep_table(std::istream& in, const std::string& source) {
    std::vector<SweepRow> rows;
    std::string line;
    std::size_t line_no = 0;
    auto number = [&](const std::string& s) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size()) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ParseError(source, line_no, "expected a number, got '" + s + "'");
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line.rfind("condition\t", 0) != 0) throw ParseError(source, line_no, "missing table header");
            continue;
        }
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, '\t');) cells.push_back(cell);
        if (cells.size() != 11) throw ParseError(source, line_no, "expected 11 columns");
        SweepRow r;
        r.condition = cells[0];
        r.rate = number(cells[1]);
        r.subset = cells[2] == "-" ? "" : cells[2];
        r.samples = static_cast<std::size_t>(number(cells[3]));
        std::stringstream seeds(cells[4]);
        for (std::string s; std::getline(seeds, s, ';');) r.mask_seeds.push_back(std::stoull(s));
        r.f1_mean = number(cells[5]);
        r.f1_std = number(cells[6]);
        r.acc_mean = number(cells[7]);
        r.acc_std = number(cells[8]);
        if (cells[9] != "-") r.mae_mean = number(cells[9]);
        if (cells[10] != "-") r.mae_std = number(cells[10]);
        rows.push_back(std::move(r));
    }
    if (line_no == 0) throw ParseError(source, 1, "empty table");
    return rows;
}

std::optional<double> cosine(std::span<const double> u, std::span<const double> v) {
    require(u.size() == v.size(), "cosine: length mismatch");
    double uv = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) return std::nullopt;
    return std::clamp(uv / std::sqrt(uu * vv), -1.0, 1.0);
}

std::optional<double> angle_degrees(std::span<const double> u, std::span<const double> v) {
    const auto c = cosine(u, v);
    if (!c) return std::nullopt;
    return std::acos(*c) * 180.0 / std::numbers::pi;
}

PhaseResult phase_difference(const FrozenModel& frozen, const Dataset& data, double p, std::uint64_t mask_seed) {
    require(p >= 0.0 && p <= 1.0, "phase_difference: rate must lie in [0, 1]");
    PhaseResult result;
    result.rate = p;
    result.mask_seed = mask_seed;
    const Dataset masked = masked_copy(data, p, mask_seed, Stream::eval_mask);
    double sum = 0.0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const Prediction clean = predict(frozen.model, data.samples[i], frozen.w);
        const Prediction noisy = p == 0.0 ? clean : predict(frozen.model, masked.samples[i], frozen.w);
        if (const auto a = angle_degrees(noisy.fused, clean.fused)) {
            sum += *a;
            ++result.counted;
        } else {
            ++result.skipped;
        }
    }
    result.mean_degrees = result.counted ? sum / static_cast<double>(result.counted) : 0.0;
    return result;
}

double mean_abs_projection_cosine(const FrozenModel& frozen, const Dataset& data) {
    double sum = 0.0;
    std::size_t count = 0;
    const IterationObserver observer = [&](std::size_t, Modality, Var, const Decomposition& d) {
        const DenseArray& proj = d.proj.value();
        const DenseArray& res = d.res.value();
        for (std::size_t k = 0; k < proj.rows(); ++k) {
            if (const auto c = cosine(proj.row_values(k), res.row_values(k))) {
                sum += std::abs(*c);
                ++count;
            }
        }
    };
    for (const SampleRecord& s : data.samples) predict(frozen.model, s, frozen.w, &observer);
    return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace prlf
