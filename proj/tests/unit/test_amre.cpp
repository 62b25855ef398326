#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "prlf/amre.hpp"
#include "prlf/error.hpp"
#include "prlf/gradcheck.hpp"
#include "prlf/model.hpp"
#include "prlf/ops.hpp"
#include "test_support.hpp"

using namespace prlf;
using prlf::testing::for_all;
using prlf::testing::random_sample;
using prlf::testing::tiny_model_config;

namespace {

Triple random_distribution(Rng& rng) {
    Triple t{uniform01(rng) + 1e-3, uniform01(rng) + 1e-3, uniform01(rng) + 1e-3};
    const double s = t[0] + t[1] + t[2];
    for (double& v : t) v /= s;
    return t;
}

void check_distribution(const Triple& t) {
    CHECK(t[0] + t[1] + t[2] == doctest::Approx(1.0).epsilon(1e-9));
    for (double v : t) CHECK(v >= 0.0);
}

void check_triple(const Triple& got, const Triple& want, double eps = 1e-15) {
    for (std::size_t m = 0; m < 3; ++m) CHECK(got[m] == doctest::Approx(want[m]).epsilon(eps));
}

FisherRecord record(Triple current, std::optional<Triple> previous) {
    FisherRecord r;
    r.current = current;
    r.previous = previous;
    r.epoch = previous ? 1 : 0;
    return r;
}

}  // namespace

TEST_SUITE("amre") {

TEST_CASE("confidence vector normalizes by the L1 norm") {
    check_triple(confidence_vector({0.2, 0.3, 0.5}), {0.2, 0.3, 0.5});
    check_triple(confidence_vector({0.9, 0.09, 0.01}), {0.9, 0.09, 0.01});
    check_triple(confidence_vector({0.4, 0.4, 0.4}), {1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK_THROWS_AS(confidence_vector({-0.1, 0.5, 0.5}), ContractViolation);
}

TEST_CASE("identical branches give a uniform confidence vector") {
    ModelConfig cfg = tiny_model_config();
    Model model(cfg, 3);
    // Copy the V branch into A and L so all three heads see the same function.
    for (Modality m : {Modality::A, Modality::L}) {
        const auto src = model.branch_parameters(Modality::V), dst = model.branch_parameters(m);
        for (std::size_t i = 0; i < 3; ++i) model.params().value(dst[i]) = model.params().value(src[i]);
    }
    Rng rng(4);
    SampleRecord s = random_sample(cfg.shape, rng);
    s[Modality::A] = s[Modality::V];
    s[Modality::L] = s[Modality::V];
    Tape t;
    const ForwardResult f = model.forward(t, s, RoutingInputs{s.label, {}, {}}, nullptr);
    check_triple(f.importance.alpha_hat, {1.0 / 3, 1.0 / 3, 1.0 / 3});
}

TEST_CASE("fisher importance normalizes and falls back to uniform") {
    check_triple(fisher_importance({1, 1, 2}), {0.25, 0.25, 0.5});
    check_triple(fisher_importance({0, 0, 0}), {1.0 / 3, 1.0 / 3, 1.0 / 3});
    check_triple(fisher_importance({5, 0, 0}), {1, 0, 0});
}

TEST_CASE("fusion weight examples") {
    check_triple(fusion_weight(record({1, 2, 3}, Triple{1, 2, 3})), {0.5, 0.5, 0.5});
    check_triple(fusion_weight(record({1, 2, 3}, std::nullopt)), {0, 0, 0});
    const double expected = 1.0 / (1.0 + std::exp(-0.5));
    CHECK(expected == doctest::Approx(0.6225).epsilon(1e-4));
    CHECK(fusion_weight(record({2, 2, 2}, Triple{1, 1, 1}))[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("fusion weight guards a vanishing current trace") {
    const Triple w = fusion_weight(record({0, 0, 0}, Triple{1e-3, 0, 0}));
    CHECK(w[0] < 1e-300);
    CHECK(w[1] == 0.5);
    for (double v : fusion_weight(record({1e-20, 5, 0}, Triple{1, 1e-20, 7}))) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("scalar fusion mode applies one sigmoid to the mean growth") {
    const Triple w = fusion_weight(record({2, 1, 4}, Triple{1, 1, 1}), FusionMode::scalar);
    const double expected = 1.0 / (1.0 + std::exp(-(0.5 + 0.0 + 0.75) / 3.0));
    check_triple(w, {expected, expected, expected});
}

TEST_CASE("mu reduces to alpha-hat at w = 0 and beta-hat at w = 1 exactly") {
    for_all(50, 1, [](Rng& rng, std::size_t) {
        const Triple a = random_distribution(rng), b = random_distribution(rng);
        CHECK(modality_importance(a, b, {0, 0, 0}).mu == a);
        CHECK(modality_importance(a, b, {1, 1, 1}).mu == b);
    });
}

TEST_CASE("uniform inputs route to language by tie-break") {
    const Triple u{1.0 / 3, 1.0 / 3, 1.0 / 3};
    for (double w : {0.0, 0.3, 1.0}) {
        const ImportanceVector iv = modality_importance(u, u, {w, w, w});
        CHECK(iv.dominant == Modality::L);
        CHECK(iv.aux == std::array<Modality, 2>{Modality::A, Modality::V});
    }
    CHECK(dominant_of({0.5, 0.5, 0.0}) == Modality::A);
    CHECK(dominant_of({0.4, 0.2, 0.4}) == Modality::L);
    CHECK(auxiliaries_of(Modality::A) == std::array<Modality, 2>{Modality::L, Modality::V});
}

TEST_CASE("importance vector invariants hold for random inputs") {
    for_all(200, 2, [](Rng& rng, std::size_t) {
        const Triple a = random_distribution(rng), b = random_distribution(rng);
        const Triple w{uniform01(rng), uniform01(rng), uniform01(rng)};
        const ImportanceVector iv = modality_importance(a, b, w);
        check_distribution(iv.alpha_hat);
        check_distribution(iv.beta_hat);
        check_distribution(iv.mu);
        for (double v : iv.w) CHECK((v >= 0.0 && v <= 1.0));
        for (std::size_t m = 0; m < 3; ++m) CHECK(iv.mu[m] <= iv.mu[index_of(iv.dominant)]);
        CHECK(iv.dominant != iv.aux[0]);
        CHECK(iv.dominant != iv.aux[1]);
        CHECK(iv.aux[0] != iv.aux[1]);
    });
}

TEST_CASE("dominant modality is invariant under a common rescaling of alpha and beta") {
    for_all(200, 3, [](Rng& rng, std::size_t) {
        const Triple alpha{uniform01(rng), uniform01(rng), uniform01(rng)};
        const Triple beta{uniform01(rng), uniform01(rng), uniform01(rng)};
        const Triple w{uniform01(rng), uniform01(rng), uniform01(rng)};
        const double s = std::exp(8.0 * uniform01(rng) - 4.0);
        const Triple alpha_s{s * alpha[0], s * alpha[1], s * alpha[2]};
        const Triple beta_s{s * beta[0], s * beta[1], s * beta[2]};
        for (RoutingMode mode : {RoutingMode::full, RoutingMode::confidence_only, RoutingMode::fisher_only})
            CHECK(route(alpha, beta, w, mode).dominant == route(alpha_s, beta_s, w, mode).dominant);
    });
}

TEST_CASE("routing modes select their importance source") {
    const Triple alpha{0.6, 0.3, 0.1}, traces{1, 2, 7}, w{0.2, 0.9, 0.4};
    CHECK(route(alpha, traces, w, RoutingMode::confidence_only).mu == confidence_vector(alpha));
    CHECK(route(alpha, traces, w, RoutingMode::fisher_only).mu == fisher_importance(traces));
    CHECK(route(alpha, traces, w, RoutingMode::uniform).mu == Triple{1.0 / 3, 1.0 / 3, 1.0 / 3});
    CHECK(route(alpha, traces, w, RoutingMode::full).mu ==
          modality_importance(confidence_vector(alpha), fisher_importance(traces), w).mu);
}

TEST_CASE("one-parameter logistic log-likelihood has trace 0.25 at the origin") {
    ParameterStore store;
    store.add("w", DenseArray::scalar(0.0));
    auto log_p = [&](Tape& t, Var w) {
        // logits (0, w x) with x = 1, so p(y=1) = sigmoid(w x)
        const std::array<Var, 2> parts{t.constant(DenseArray::scalar(0.0)), w};
        return ops::log_prob(ops::softmax_rows(ops::concat_cols(parts)), 1);
    };
    Tape t;
    t.backward(log_p(t, t.parameter(store, 0)));
    CHECK(t.parameter_gradient_squared_norm() == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(grad_check(log_p, DenseArray::scalar(0.0)) < 1e-8);

    Tape doubled;
    doubled.backward(ops::scale(log_p(doubled, doubled.parameter(store, 0)), 2.0));
    CHECK(doubled.parameter_gradient_squared_norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("fisher trace matches the per-entry brute-force oracle") {
    for (FisherTarget target : {FisherTarget::logit, FisherTarget::log_likelihood}) {
        ModelConfig cfg = tiny_model_config();
        cfg.fisher_target = target;
        for_all(40, 4, [&](Rng& rng, std::size_t i) {
            const Model model(cfg, i);
            SampleRecord s = random_sample(cfg.shape, rng, i);
            for (Modality m : kModalities)
                if (uniform01(rng) < 0.3) {
                    s[m].mask[1] = 0;
                    for (std::size_t p = 0; p < s[m].dim(); ++p) s[m].frames(1, p) = 0.0;
                }
            for (Modality m : kModalities) {
                const double want = oracle::fisher_trace(model, s, m, s.label);
                CHECK(model.fisher_trace(s, m, s.label) == doctest::Approx(want).epsilon(1e-9));
            }
        });
    }
}

TEST_CASE("fisher trace without a label uses the head's predicted class") {
    const ModelConfig cfg = tiny_model_config();
    const Model model(cfg, 5);
    Rng rng(6);
    for (int n = 0; n < 10; ++n) {
        const SampleRecord s = random_sample(cfg.shape, rng);
        for (Modality m : kModalities) {
            Tape t;
            const auto probs = model.head_probabilities(t, model.encode(t, s, m)).value().values();
            const std::size_t predicted = probs[1] > probs[0] ? 1 : 0;
            CHECK(model.fisher_trace(s, m, std::nullopt) == model.fisher_trace(s, m, predicted));
        }
    }
}

TEST_CASE("a missing modality has zero trace") {
    const ModelConfig cfg = tiny_model_config();
    const Model model(cfg, 7);
    Rng rng(8);
    SampleRecord s = random_sample(cfg.shape, rng);
    apply_inter_mask(s, ModalitySet::parse("l"));
    CHECK(model.fisher_trace(s, Modality::V, s.label) == 0.0);
    CHECK(model.fisher_trace(s, Modality::A, s.label) == 0.0);
    CHECK(model.fisher_trace(s, Modality::L, s.label) > 0.0);
}

TEST_CASE("fisher trace does not touch the parameters") {
    const ModelConfig cfg = tiny_model_config();
    const Model model(cfg, 9);
    const ParameterStore before = model.params();
    Rng rng(10);
    (void)model.fisher_traces(random_sample(cfg.shape, rng), 1);
    CHECK(model.params() == before);
}

TEST_CASE("fisher store rotates current into previous") {
    FisherStore store;
    store.record(4, {1, 2, 3}, 0);
    CHECK_FALSE(store.find(4)->previous.has_value());
    CHECK(store.mean_weight() == Triple{0, 0, 0});
    store.record(4, {2, 2, 6}, 1);
    const FisherRecord* r = store.find(4);
    CHECK(r->previous == Triple{1, 2, 3});
    CHECK(r->current == Triple{2, 2, 6});
    CHECK(r->epoch == 1);
    CHECK(store.find(5) == nullptr);
    CHECK_THROWS_AS(store.record(5, {-1, 0, 0}, 0), ContractViolation);
    const Triple w = store.mean_weight();
    CHECK(w[1] == 0.5);
    CHECK(w[0] == doctest::Approx(1.0 / (1.0 + std::exp(-0.5))));
}

}  // TEST_SUITE
