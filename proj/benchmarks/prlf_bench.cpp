#include <benchmark/benchmark.h>

#include "prlf/dataset.hpp"
#include "prlf/model.hpp"
#include "prlf/ops.hpp"
#include "prlf/training.hpp"

namespace {

using namespace prlf;

DenseArray random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
    DenseArray a = DenseArray::matrix(rows, cols);
    for (double& v : a.values()) v = 2.0 * uniform01(rng) - 1.0;
    return a;
}

struct Fixture {
    Fixture() : data(make_data()), model(make_config(data), 1) {}

    static Dataset make_data() {
        SynthConfig c;
        c.samples = 32;
        return generate(c).data;
    }
    static ModelConfig make_config(const Dataset& d) {
        ModelConfig c;
        c.shape = d.shape;
        return c;
    }

    Dataset data;
    Model model;
};

void BM_Matmul(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    Rng rng(1);
    const DenseArray a = random_matrix(n, n, rng), b = random_matrix(n, n, rng);
    for (auto _ : state) {
        Tape t;
        benchmark::DoNotOptimize(ops::matmul(t.constant(a), t.constant(b)).value()[0]);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(8, 128)->Complexity(benchmark::oNCubed);

void BM_Forward(benchmark::State& state) {
    Fixture f;
    const RoutingInputs routing{std::nullopt, {1.0, 1.0, 1.0}, {0.5, 0.5, 0.5}};
    std::size_t i = 0;
    for (auto _ : state) {
        Tape t;
        const ForwardResult r = f.model.forward(t, f.data.samples[i++ % f.data.samples.size()], routing, nullptr);
        benchmark::DoNotOptimize(r.probabilities.value()[0]);
    }
}
BENCHMARK(BM_Forward);

void BM_FisherTraces(benchmark::State& state) {
    Fixture f;
    std::size_t i = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(f.model.fisher_traces(f.data.samples[i++ % f.data.samples.size()], std::nullopt));
}
BENCHMARK(BM_FisherTraces);

void BM_Predict(benchmark::State& state) {
    Fixture f;
    std::size_t i = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(predict(f.model, f.data.samples[i++ % f.data.samples.size()], {0.5, 0.5, 0.5}));
}
BENCHMARK(BM_Predict);

void BM_TrainStep(benchmark::State& state) {
    Fixture f;
    const TrainConfig tc;
    GradientBuffer grad(f.model.params());
    Rng rng(2);
    std::size_t i = 0;
    for (auto _ : state) {
        const SampleRecord& s = f.data.samples[i++ % f.data.samples.size()];
        const RoutingInputs routing{s.label, f.model.fisher_traces(s, s.label), {0.5, 0.5, 0.5}};
        Tape t;
        const ForwardResult r = f.model.forward(t, s, routing, &rng);
        t.backward(total_loss(r.task_loss, r.uni_loss, r.phase_loss, tc.eta1, tc.eta2), &grad);
    }
}
BENCHMARK(BM_TrainStep);

}  // namespace

BENCHMARK_MAIN();
