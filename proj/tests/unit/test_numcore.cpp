#include <doctest.h>

#include <array>
#include <cmath>
#include <functional>
#include <limits>

#include "prlf/error.hpp"
#include "prlf/gradcheck.hpp"
#include "prlf/ops.hpp"
#include "prlf/params.hpp"
#include "prlf/tape.hpp"
#include "test_support.hpp"

using namespace prlf;
using prlf::testing::fixed_weights;
using prlf::testing::for_all;
using prlf::testing::random_matrix;
using prlf::testing::random_size;

namespace {

constexpr double kGradTolerance = 1e-4;

// Scalar objective sum(W ⊙ y) with W fixed, so every output entry matters.
Var weighted(Var y, std::uint64_t seed = 99) {
    return ops::sum_all(ops::mul(y, y.tape->constant(fixed_weights(y.value(), seed))));
}

double check_unary(const std::function<Var(Var)>& op, const DenseArray& point) {
    return grad_check([&](Tape&, Var x) { return weighted(op(x)); }, point);
}

}  // namespace

TEST_SUITE("numcore") {

TEST_CASE("dense array shapes and views") {
    DenseArray a = DenseArray::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    CHECK(a.rows() == 2);
    CHECK(a.cols() == 3);
    CHECK(a(1, 2) == 6);
    CHECK(a.sum() == 21);
    CHECK(a.squared_norm() == 91);
    CHECK(a.row_values(1)[0] == 4);
    CHECK(DenseArray::row({1, 2}).rows() == 1);
    CHECK(DenseArray::scalar(3).cols() == 1);
    CHECK(a.shape_string() == "[2x3]");
    CHECK_THROWS_AS(DenseArray::matrix(2, 2, {1, 2, 3}), ContractViolation);
    a(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_FALSE(a.all_finite());
    CHECK_THROWS_AS(a.check_finite("test"), NumericError);
}

TEST_CASE("matmul agrees with a triple-loop oracle on random shapes") {
    for_all(50, 1, [](Rng& rng, std::size_t) {
        const std::size_t n = random_size(rng, 1, 6), k = random_size(rng, 1, 6), m = random_size(rng, 1, 6);
        const DenseArray A = random_matrix(n, k, rng), B = random_matrix(k, m, rng);
        Tape t;
        const DenseArray C = ops::matmul(t.constant(A), t.constant(B)).value();
        const DenseArray Cnt = ops::matmul_nt(t.constant(A), t.constant(random_matrix(m, k, rng))).value();
        CHECK(Cnt.rows() == n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                double s = 0.0;
                for (std::size_t p = 0; p < k; ++p) s += A(i, p) * B(p, j);
                CHECK(C(i, j) == doctest::Approx(s).epsilon(1e-14));
            }
    });
    Tape t;
    CHECK_THROWS_AS(ops::matmul(t.constant(DenseArray::matrix(2, 3)), t.constant(DenseArray::matrix(2, 3))),
                    ContractViolation);
}

TEST_CASE("binary kernels pass finite-difference checks") {
    Rng rng(2);
    const DenseArray a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
    const DenseArray b_t = random_matrix(4, 2, rng), row = random_matrix(1, 4, rng);
    auto with_b = [&](auto op) {
        return grad_check([&](Tape& t, Var x) { return weighted(op(x, t.constant(b))); }, a) +
               grad_check([&](Tape& t, Var x) { return weighted(op(t.constant(a), x)); }, b);
    };
    CHECK(with_b(ops::add) < kGradTolerance);
    CHECK(with_b(ops::sub) < kGradTolerance);
    CHECK(with_b(ops::mul) < kGradTolerance);
    CHECK(with_b(ops::row_dot) < kGradTolerance);
    CHECK(with_b(ops::matmul_nt) < kGradTolerance);
    CHECK(grad_check([&](Tape& t, Var x) { return weighted(ops::matmul(x, t.constant(b_t))); }, a) < kGradTolerance);
    CHECK(grad_check([&](Tape& t, Var x) { return weighted(ops::matmul(t.constant(a), x)); }, b_t) < kGradTolerance);
    CHECK(grad_check([&](Tape& t, Var x) { return weighted(ops::add_row(t.constant(a), x)); }, row) < kGradTolerance);
    CHECK(grad_check([&](Tape& t, Var x) { return weighted(ops::mul_row(t.constant(a), x)); }, row) < kGradTolerance);
    CHECK(grad_check([&](Tape& t, Var x) { return weighted(ops::mul_row(x, t.constant(row))); }, a) < kGradTolerance);
    const DenseArray bias = random_matrix(1, 2, rng);
    CHECK(grad_check([&](Tape& t, Var x) { return weighted(ops::linear(x, t.constant(b_t), t.constant(bias))); }, a) <
          kGradTolerance);
}

TEST_CASE("unary kernels pass finite-difference checks") {
    Rng rng(3);
    DenseArray a = random_matrix(3, 5, rng, 2.0);
    for (double& v : a.values())
        if (std::abs(v) < 0.05) v = 0.3;  // keep relu away from its kink
    CHECK(check_unary([](Var x) { return ops::relu(x); }, a) < kGradTolerance);
    CHECK(check_unary([](Var x) { return ops::sigmoid(x); }, a) < kGradTolerance);
    CHECK(check_unary([](Var x) { return ops::softmax_rows(x); }, a) < kGradTolerance);
    CHECK(check_unary([](Var x) { return ops::square(x); }, a) < kGradTolerance);
    CHECK(check_unary([](Var x) { return ops::scale(x, -1.7); }, a) < kGradTolerance);
    CHECK(check_unary([](Var x) { return ops::mean_rows(x); }, a) < kGradTolerance);
    CHECK(check_unary([](Var x) { return ops::l1_normalize(x); }, a) < kGradTolerance);
    CHECK(grad_check([](Tape&, Var x) { return ops::sum_all(x); }, a) < kGradTolerance);
    CHECK(grad_check([](Tape&, Var x) { return ops::mean_all(ops::square(x)); }, a) < kGradTolerance);
}

TEST_CASE("structural kernels pass finite-difference checks") {
    Rng rng(4);
    const DenseArray a = random_matrix(2, 3, rng), b = random_matrix(4, 3, rng), c = random_matrix(2, 5, rng);
    CHECK(grad_check([&](Tape& t, Var x) {
              const std::array<Var, 2> parts{x, t.constant(b)};
              return weighted(ops::concat_rows(parts));
          }, a) < kGradTolerance);
    CHECK(grad_check([&](Tape& t, Var x) {
              const std::array<Var, 2> parts{t.constant(c), x};
              return weighted(ops::concat_cols(parts));
          }, a) < kGradTolerance);
    CHECK(grad_check([](Tape& t, Var x) {
              Rng drop(5);  // same mask on every evaluation
              (void)t;
              return weighted(ops::dropout(x, 0.4, drop));
          }, a) < kGradTolerance);
}

TEST_CASE("probability kernels pass finite-difference checks") {
    Rng rng(6);
    const DenseArray logits = random_matrix(1, 4, rng);
    CHECK(grad_check([](Tape&, Var x) { return ops::cross_entropy(ops::softmax_rows(x), 2); }, logits) <
          kGradTolerance);
    CHECK(grad_check([](Tape&, Var x) { return ops::log_prob(ops::softmax_rows(x), 0); }, logits) < kGradTolerance);
}

TEST_CASE("softmax rows are distributions and survive huge logits") {
    for_all(40, 7, [](Rng& rng, std::size_t) {
        const DenseArray x = random_matrix(random_size(rng, 1, 4), random_size(rng, 1, 6), rng, 50.0);
        Tape t;
        const DenseArray p = ops::softmax_rows(t.constant(x)).value();
        for (std::size_t r = 0; r < p.rows(); ++r) {
            double s = 0.0;
            for (double v : p.row_values(r)) {
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    });
    Tape t;
    const DenseArray p = ops::softmax_rows(t.constant(DenseArray::row({1000.0, -1000.0}))).value();
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
}

TEST_CASE("sigmoid is stable at extreme inputs") {
    Tape t;
    const DenseArray y = ops::sigmoid(t.constant(DenseArray::row({-1000.0, 0.0, 1000.0}))).value();
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.5);
    CHECK(y[2] == 1.0);
}

TEST_CASE("relu subgradient at zero is zero") {
    Tape t;
    Var x = t.input(DenseArray::row({0.0, -1.0, 2.0}));
    t.backward(ops::sum_all(ops::relu(x)));
    const DenseArray g = t.grad(x);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    CHECK(g[2] == 1.0);
}

TEST_CASE("l1 normalization falls back to uniform below the norm floor") {
    Tape t;
    CHECK(ops::l1_normalize(t.constant(DenseArray::row({0.0, 0.0, 0.0, 0.0}))).value() ==
          DenseArray::row({0.25, 0.25, 0.25, 0.25}));
    CHECK(ops::l1_normalize(t.constant(DenseArray::row({1.0, 1.0, 2.0}))).value() ==
          DenseArray::row({0.25, 0.25, 0.5}));
}

TEST_CASE("cross entropy and log-probability values") {
    Tape t;
    Var p = t.constant(DenseArray::row({0.25, 0.75}));
    CHECK(ops::cross_entropy(p, 1).item() == doctest::Approx(-std::log(0.75)));
    CHECK(ops::log_prob(p, 0).item() == doctest::Approx(std::log(0.25)));
    CHECK_THROWS_AS(ops::cross_entropy(p, 2), ContractViolation);
}

TEST_CASE("log of a vanishing probability is clamped and counted") {
    Tape t;
    Var x = t.input(DenseArray::row({0.0, 1.0}));
    Var loss = ops::cross_entropy(x, 0);
    CHECK(loss.item() == doctest::Approx(-std::log(ops::kProbabilityFloor)));
    CHECK(t.clamp_count() == 1);
    t.backward(loss);
    CHECK(t.grad(x)[0] == 0.0);
}

TEST_CASE("dropout at rate zero is the identity and rescales survivors otherwise") {
    Rng rng(8);
    Tape t;
    Var x = t.constant(DenseArray::matrix(50, 40, 1.0));
    CHECK(ops::dropout(x, 0.0, rng).id == x.id);
    const DenseArray y = ops::dropout(x, 0.25, rng).value();
    std::size_t kept = 0;
    for (double v : y.values()) {
        CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
        kept += v != 0.0;
    }
    CHECK(static_cast<double>(kept) / 2000.0 == doctest::Approx(0.75).epsilon(0.05));
    CHECK_THROWS_AS(ops::dropout(x, 1.0, rng), ContractViolation);
}

TEST_CASE("grid snapping lands on multiples and passes gradients straight through") {
    Rng rng(9);
    Tape t;
    Var x = t.input(random_matrix(3, 3, rng));
    const double q = std::ldexp(1.0, -20);
    Var y = ops::snap_to_grid(x, q);
    for (double v : y.value().values()) CHECK(std::fmod(v, q) == 0.0);
    t.backward(ops::sum_all(y));
    const DenseArray g = t.grad(x);
    for (double v : g.values()) CHECK(v == 1.0);
    CHECK_THROWS_AS(ops::snap_to_grid(x, 0.3), ContractViolation);
}

TEST_CASE("tape enforces a single backward pass") {
    Tape t;
    Var x = t.input(DenseArray::scalar(2.0));
    Var y = ops::square(x);
    t.backward(y);
    CHECK(t.grad(x)[0] == 4.0);
    CHECK_THROWS_AS(t.backward(y), ContractViolation);
    CHECK_THROWS_AS(ops::square(x), ContractViolation);
    t.reset();
    CHECK(t.size() == 0);
}

TEST_CASE("tape rejects non-scalar losses and reports zero gradient for unreachable nodes") {
    Tape t;
    Var a = t.input(DenseArray::row({1.0, 2.0}));
    Var b = t.input(DenseArray::row({3.0, 4.0}));
    CHECK_THROWS_AS(t.backward(a), ContractViolation);
    t.backward(ops::sum_all(a));
    CHECK(t.grad(b) == DenseArray::matrix(1, 2));
}

TEST_CASE("non-finite results raise a numeric error") {
    Tape t;
    Var big = t.constant(DenseArray::row({1e200}));
    CHECK_THROWS_AS(ops::square(big), NumericError);
    CHECK_THROWS_AS(t.constant(DenseArray::row({std::numeric_limits<double>::infinity()})), NumericError);
}

TEST_CASE("parameter gradients accumulate into a buffer without aliasing") {
    ParameterStore store;
    store.add("w", DenseArray::row({1.0, -2.0}));
    GradientBuffer sink(store);
    for (int pass = 0; pass < 2; ++pass) {
        Tape t;
        Var w = t.parameter(store, 0);
        CHECK(t.parameter(store, 0).id == w.id);
        t.backward(ops::sum_all(ops::square(w)), &sink);
        CHECK(t.parameter_gradient_squared_norm() == doctest::Approx(4.0 + 16.0));
    }
    CHECK(sink[0] == DenseArray::row({4.0, -8.0}));
    CHECK(store.value(0) == DenseArray::row({1.0, -2.0}));
    ParameterStore other;
    other.add("w", DenseArray::row({0.0, 0.0}));
    Tape t;
    t.parameter(store, 0);
    CHECK_THROWS_AS(t.parameter(other, 0), ContractViolation);
}

TEST_CASE("parameter store and gradient buffer bookkeeping") {
    ParameterStore store;
    CHECK(store.add("a", DenseArray::matrix(2, 2, 1.0)) == 0);
    CHECK(store.add("b", DenseArray::row({3.0})) == 1);
    CHECK(store.index("b") == 1);
    CHECK(store.scalar_count() == 5);
    CHECK_THROWS_AS(store.add("a", DenseArray::row({0.0})), ContractViolation);
    CHECK_THROWS_AS(store.index("c"), ContractViolation);
    GradientBuffer g(store), h(store);
    h[0].fill(1.0);
    g.add(h, 2.0);
    g.scale(0.5);
    CHECK(g.squared_norm() == doctest::Approx(4.0));
    g.zero();
    CHECK(g.squared_norm() == 0.0);
}

TEST_CASE("glorot initialization respects its bound") {
    Rng rng(10);
    const DenseArray w = glorot_uniform(20, 64, rng);
    const double a = std::sqrt(6.0 / 84.0);
    double mean = 0.0;
    for (double v : w.values()) {
        CHECK(std::abs(v) <= a);
        mean += v / static_cast<double>(w.size());
    }
    CHECK(std::abs(mean) < 0.05);
}

TEST_CASE("grad check reports the worst coordinate") {
    const GradCheckReport r = grad_check_report([](Tape&, Var x) { return ops::sum_all(ops::square(x)); },
                                                DenseArray::row({1.0, -3.0}));
    CHECK(r.max_relative_error < 1e-8);
    CHECK(r.analytic == doctest::Approx(r.numeric));
    // A wrong gradient is caught.
    const double bad = grad_check(
        [](Tape& t, Var x) {
            DenseArray y = x.value();
            return ops::sum_all(t.record(std::move(y), {x.id}, [](Tape& t, std::uint32_t self) {
                const auto in = t.inputs(self)[0];
                for (double& v : t.grad_slot(in).values()) v += 3.0 * t.out_grad(self)[0];
            }));
        },
        DenseArray::row({0.5}));
    CHECK(bad > 0.1);
}

TEST_CASE("derived seeds are deterministic and path-sensitive") {
    CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
    CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
    CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(rng);
        CHECK((u >= 0.0 && u < 1.0));
    }
}

}  // TEST_SUITE
