#include <doctest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "prlf/checkpoint.hpp"
#include "prlf/config.hpp"
#include "prlf/error.hpp"
#include "prlf/ops.hpp"
#include "prlf/training.hpp"
#include "test_support.hpp"

using namespace prlf;
using prlf::testing::for_all;
using prlf::testing::random_sample;
using prlf::testing::tiny_model_config;
using prlf::testing::tiny_synth;

namespace {

RunConfig tiny_run(std::size_t epochs) {
    RunConfig rc;
    rc.data = tiny_synth(48);
    rc.model = tiny_model_config();
    rc.train.epochs = epochs;
    rc.train.batch_size = 8;
    return rc;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("loss weights of zero leave the task loss exactly") {
    Tape t;
    Var task = t.constant(DenseArray::scalar(0.6931)), uni = t.constant(DenseArray::scalar(4.0)),
        phase = t.constant(DenseArray::scalar(9.0));
    CHECK(total_loss(task, uni, phase, 0.0, 0.0).item() == 0.6931);
    CHECK(combine_losses(0.6931, 4.0, 9.0, 0.0, 0.0).total == 0.6931);
}

TEST_CASE("default weights combine components into 2.3") {
    const TrainConfig defaults;
    CHECK(defaults.eta1 == 0.5);
    CHECK(defaults.eta2 == 0.1);
    const LossComponents c = combine_losses(1.0, 2.0, 3.0, defaults.eta1, defaults.eta2);
    CHECK(c.total == doctest::Approx(2.3).epsilon(1e-15));
    Tape t;
    CHECK(total_loss(t.constant(DenseArray::scalar(1.0)), t.constant(DenseArray::scalar(2.0)),
                     t.constant(DenseArray::scalar(3.0)), 0.5, 0.1)
              .item() == doctest::Approx(2.3).epsilon(1e-15));
}

TEST_CASE("model defaults") {
    const ModelConfig m;
    CHECK(m.interaction.steps == 4);
    CHECK(m.interaction.gamma == 0.8);
    CHECK(m.tokens == 8);
    CHECK(m.width == 64);
}

TEST_CASE("unimodal loss of uniform heads over three classes is 3 ln 3") {
    ModelConfig cfg = tiny_model_config();
    cfg.shape.classes = 3;
    Model model(cfg, 1);
    for (Modality m : kModalities)
        for (std::size_t i : {std::size_t{1}, std::size_t{2}}) model.params().value(model.branch_parameters(m)[i]).fill(0.0);
    Rng rng(2);
    const SampleRecord s = random_sample(cfg.shape, rng);
    Tape t;
    const ForwardResult f = model.forward(t, s, RoutingInputs{s.label, {}, {}}, nullptr);
    CHECK(f.uni_loss.item() == doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-14));
}

TEST_CASE("total loss gradient matches finite differences at tiny size") {
    ModelConfig cfg = tiny_model_config();
    cfg.routing = RoutingMode::fisher_only;
    cfg.interaction.gate = GateMode::token;
    for_all(2, 3, [&](Rng& rng, std::size_t i) {
        Model model(cfg, 10 + i);
        const SampleRecord s = random_sample(cfg.shape, rng, i);
        CHECK(oracle::model_gradient_error(model, s, RoutingInputs{s.label, {2.0, 0.5, 1.0}, {}}, 0.5, 0.1) < 1e-4);
    });
}

TEST_CASE("epoch mask seeds depend on the epoch") {
    CHECK(epoch_mask_seed(1, 0) != epoch_mask_seed(1, 1));
    CHECK(epoch_mask_seed(1, 3) == epoch_mask_seed(1, 3));
}

TEST_CASE("training is deterministic for a fixed seed") {
    const RunConfig rc = tiny_run(3);
    const Dataset data = generate(rc.data).data;
    auto run = [&] {
        Model model(rc.model, 5);
        Trainer trainer(model, rc.train);
        const auto stats = trainer.fit(data);
        return std::make_pair(stats, model.params());
    };
    const auto a = run(), b = run();
    REQUIRE(a.first.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(a.first[e].loss.total == b.first[e].loss.total);
        CHECK(a.first[e].mask_seed == b.first[e].mask_seed);
        CHECK(a.first[e].mean_mu == b.first[e].mean_mu);
    }
    CHECK(a.second == b.second);
}

TEST_CASE("w stays 0 until a previous trace exists") {
    const RunConfig rc = tiny_run(3);
    const Dataset data = generate(rc.data).data;
    Model model(rc.model, 6);
    Trainer trainer(model, rc.train);
    const EpochStats first = trainer.train_epoch(data, 0);
    CHECK(first.mean_w == Triple{0, 0, 0});
    CHECK(trainer.fisher().size() == data.size());
    CHECK(trainer.train_epoch(data, 1).mean_w == Triple{0, 0, 0});
    const EpochStats third = trainer.train_epoch(data, 2);
    for (double w : third.mean_w) CHECK((w > 0.0 && w < 1.0));
}

TEST_CASE("no masking still fills the Fisher store") {
    RunConfig rc = tiny_run(1);
    rc.train.missing_rate = 0.0;
    const Dataset data = generate(rc.data).data;
    Model model(rc.model, 7);
    Trainer trainer(model, rc.train);
    trainer.train_epoch(data, 0);
    CHECK(trainer.fisher().size() == data.size());
    for (const auto& [id, r] : trainer.fisher().records()) {
        CHECK_FALSE(r.previous.has_value());
        for (double v : r.current) CHECK(v > 0.0);
    }
}

TEST_CASE("Fisher records rotate one epoch at a time") {
    const RunConfig rc = tiny_run(3);
    const Dataset data = generate(rc.data).data;
    Model model(rc.model, 8);
    Trainer trainer(model, rc.train);
    trainer.train_epoch(data, 0);
    FisherStore before = trainer.fisher();
    for (std::size_t epoch = 1; epoch < 3; ++epoch) {
        trainer.train_epoch(data, epoch);
        for (const auto& [id, r] : trainer.fisher().records()) {
            REQUIRE(r.previous.has_value());
            CHECK(*r.previous == before.find(id)->current);
            CHECK(r.epoch == epoch);
        }
        before = trainer.fisher();
    }
}

TEST_CASE("a non-finite loss aborts with the batch and sample named") {
    const RunConfig rc = tiny_run(1);
    Dataset data = generate(rc.data).data;
    data.samples[5][Modality::L].frames(0, 0) = 1e300;
    Model model(rc.model, 9);
    Trainer trainer(model, rc.train);
    try {
        trainer.train_epoch(data, 0);
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        const std::string what = e.what();
        CHECK(what.find("epoch 0") != std::string::npos);
        CHECK(what.find("batch") != std::string::npos);
        CHECK(what.find("sample 5") != std::string::npos);
    }
}

TEST_CASE("optimizer steps move parameters against the gradient") {
    ParameterStore p;
    p.add("x", DenseArray::row({1.0, -1.0}));
    TrainConfig c;
    c.learning_rate = 0.1;
    c.momentum = 0.5;
    c.clip_norm = 0.0;
    Optimizer sgd(p, c);
    GradientBuffer g(p);
    g[0] = DenseArray::row({2.0, -4.0});
    sgd.step(p, g);
    CHECK(p.value(0) == DenseArray::row({0.8, -0.6}));
    sgd.step(p, g);  // velocity 0.5 * 2 + 2 = 3
    CHECK(p.value(0)[0] == doctest::Approx(0.5).epsilon(1e-15));

    c.clip_norm = 1.0;
    ParameterStore q;
    q.add("x", DenseArray::row({0.0, 0.0}));
    Optimizer clipped(q, c);
    GradientBuffer h(q);
    h[0] = DenseArray::row({3.0, 4.0});
    clipped.step(q, h);
    CHECK(q.value(0)[0] == doctest::Approx(-0.06).epsilon(1e-15));
    CHECK(q.value(0)[1] == doctest::Approx(-0.08).epsilon(1e-15));

    c.optimizer = OptimizerKind::adam;
    c.clip_norm = 0.0;
    ParameterStore r;
    r.add("x", DenseArray::row({0.0}));
    Optimizer adam(r, c);
    GradientBuffer k(r);
    k[0] = DenseArray::row({5.0});
    adam.step(r, k);  // first Adam step is lr * sign(g) up to eps
    CHECK(r.value(0)[0] == doctest::Approx(-0.1).epsilon(1e-9));
}

TEST_CASE("predict returns a deterministic distribution") {
    const ModelConfig cfg = tiny_model_config();
    const Model model(cfg, 11);
    Rng rng(12);
    for (int n = 0; n < 20; ++n) {
        const SampleRecord s = random_sample(cfg.shape, rng);
        const Prediction a = predict(model, s, {0.3, 0.4, 0.5}), b = predict(model, s, {0.3, 0.4, 0.5});
        double sum = 0.0;
        for (double p : a.probabilities) sum += p;
        CHECK(std::abs(sum - 1.0) <= 1e-12);
        CHECK(a.probabilities == b.probabilities);
    }
}

TEST_CASE("fully missing inputs give one constant prediction") {
    const ModelConfig cfg = tiny_model_config();
    const Model model(cfg, 13);
    Rng rng(14);
    std::vector<double> first;
    for (int n = 0; n < 5; ++n) {
        SampleRecord s = random_sample(cfg.shape, rng, static_cast<std::uint64_t>(n));
        apply_intra_mask(s, 1.0, rng);
        const Prediction p = predict(model, s, {0.5, 0.5, 0.5});
        if (n == 0) first = p.probabilities;
        CHECK(p.probabilities == first);
    }
}

TEST_CASE("predict rejects a malformed sample") {
    const ModelConfig cfg = tiny_model_config();
    const Model model(cfg, 15);
    Rng rng(16);
    SampleRecord s = random_sample(cfg.shape, rng);
    s[Modality::A].frames = DenseArray::matrix(5, 3);
    s[Modality::A].mask.assign(5, 1);
    CHECK_THROWS_AS(predict(model, s, {}), ContractViolation);
}

TEST_CASE("checkpoints round-trip bit-exactly and predict identically") {
    const RunConfig rc = tiny_run(2);
    const Dataset data = generate(rc.data).data;
    Model model(model_config(rc), init_seed(rc));
    Trainer trainer(model, rc.train);
    trainer.fit(data);
    const Checkpoint ck = make_checkpoint(rc, model, trainer);
    CHECK(ck.epoch == 2);
    CHECK(ck.rng_digest == epoch_mask_seed(rc.train.seed, 2));

    std::stringstream buf;
    write_checkpoint(buf, ck);
    const std::string bytes = buf.str();
    const Checkpoint back = read_checkpoint(buf);
    CHECK(back == ck);
    std::stringstream again;
    write_checkpoint(again, back);
    CHECK(again.str() == bytes);

    testing::TempDir dir("ckpt");
    save_checkpoint(ck, dir.path() / "c.bin");
    const Checkpoint loaded = load_checkpoint(dir.path() / "c.bin");
    CHECK(loaded == ck);
    const Model restored(model_config(loaded.config), loaded.params);
    for (const SampleRecord& s : data.samples) {
        const Prediction a = predict(model, s, trainer.inference_weight());
        const Prediction b = predict(restored, s, loaded.frozen_w);
        CHECK(a.probabilities == b.probabilities);
        CHECK(a.fused == b.fused);
    }
}

TEST_CASE("corrupt checkpoints are rejected") {
    const RunConfig rc = tiny_run(1);
    const Dataset data = generate(rc.data).data;
    Model model(model_config(rc), init_seed(rc));
    Trainer trainer(model, rc.train);
    trainer.fit(data);
    std::stringstream buf;
    write_checkpoint(buf, make_checkpoint(rc, model, trainer));
    const std::string bytes = buf.str();

    std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(truncated), ParseError);
    std::stringstream trailing(bytes + "x");
    CHECK_THROWS_AS(read_checkpoint(trailing), ParseError);
    std::string bad = bytes;
    bad[0] = 'X';
    std::stringstream magic(bad);
    CHECK_THROWS_AS(read_checkpoint(magic), ParseError);
}

TEST_CASE("loss falls by at least 20% over ten epochs with default settings") {
    RunConfig rc;
    rc.data.samples = 300;
    rc.train.epochs = 10;
    const Dataset data = generate(rc.data).data;
    Model model(model_config(rc), init_seed(rc));
    Trainer trainer(model, rc.train);
    const auto stats = trainer.fit(data);
    MESSAGE("epoch 0 loss " << stats.front().loss.total << ", epoch 9 loss " << stats.back().loss.total);
    CHECK(stats.back().loss.total <= 0.8 * stats.front().loss.total);
}

}  // TEST_SUITE
