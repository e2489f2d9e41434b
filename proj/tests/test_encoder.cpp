#include <doctest.h>

#include "udekit/encoder.hpp"
#include "udekit/rng.hpp"

using namespace udekit;

namespace {

std::vector<double> row_values(const Tensor& t) {
    auto v = t.values();
    return {v.begin(), v.end()};
}

} // namespace

TEST_SUITE("encoder") {

TEST_CASE("identity encoding reproduces the samples") {
    StimulusEncoder enc = StimulusEncoder::identity(2);
    Tape tape;
    std::vector<std::vector<double>> v{{1.0, 2.0}, {3.0, 4.0}};
    auto rows = enc.encode(tape, v, {0.0, 1.0});
    CHECK(row_values(rows[0]) == std::vector<double>{1.0, 2.0});
    CHECK(row_values(rows[1]) == std::vector<double>{3.0, 4.0});
}

TEST_CASE("affine encoding with zero weights emits the bias") {
    StimulusEncoder enc = StimulusEncoder::affine(2, 1);
    enc.c.value = {1.0};
    Tape tape;
    std::vector<std::vector<double>> v{{5.0, -3.0}, {0.0, 9.0}, {2.0, 2.0}};
    auto rows = enc.encode(tape, v, {0.0, 0.5, 1.0});
    for (const auto& r : rows) CHECK(row_values(r) == std::vector<double>{1.0});
}

TEST_CASE("the time channel carries the sample times") {
    StimulusEncoder enc = StimulusEncoder::identity(1, Interp::Linear, true);
    CHECK(enc.out_dim == 2);
    Tape tape;
    std::vector<std::vector<double>> v{{7.0}, {8.0}, {9.0}};
    auto rows = enc.encode(tape, v, {0.0, 0.5, 1.0});
    CHECK(row_values(rows[0]) == std::vector<double>{7.0, 0.0});
    CHECK(row_values(rows[1]) == std::vector<double>{8.0, 0.5});
    CHECK(row_values(rows[2]) == std::vector<double>{9.0, 1.0});
}

TEST_CASE("linear interpolation hits the midpoint") {
    StimulusEncoder enc = StimulusEncoder::identity(1);
    Tape tape;
    auto rows = enc.encode(tape, {{0.0}, {2.0}}, {0.0, 1.0});
    Tensor mid = interpolate(enc, rows, {0.0, 1.0}, 0.5);
    CHECK(mid.values()[0] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("zero-order hold keeps the previous sample") {
    StimulusEncoder enc = StimulusEncoder::identity(1, Interp::ZeroOrderHold);
    Tape tape;
    auto rows = enc.encode(tape, {{0.0}, {2.0}}, {0.0, 1.0});
    CHECK(interpolate(enc, rows, {0.0, 1.0}, 0.99).values()[0] == 0.0);
}

TEST_CASE("interpolation reproduces knot values under both schemes") {
    const std::vector<double> times{0.0, 0.4, 1.1, 2.0};
    std::vector<std::vector<double>> v{{1.0}, {-2.0}, {0.5}, {3.0}};
    for (Interp scheme : {Interp::Linear, Interp::ZeroOrderHold}) {
        StimulusEncoder enc = StimulusEncoder::identity(1, scheme);
        Tape tape;
        auto rows = enc.encode(tape, v, times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            CHECK(interpolate(enc, rows, times, times[k]).values()[0] == v[k][0]);
        }
    }
}

TEST_CASE("linear interpolation stays inside the bracketing hull") {
    StimulusEncoder enc = StimulusEncoder::identity(1);
    Tape tape;
    Rng rng(31);
    const std::vector<double> times{0.0, 1.0, 2.0, 3.0};
    std::vector<std::vector<double>> v;
    for (int i = 0; i < 4; ++i) v.push_back({rng.uniform(-2.0, 2.0)});
    auto rows = enc.encode(tape, v, times);
    for (int trial = 0; trial < 200; ++trial) {
        const double t = rng.uniform(0.0, 3.0);
        const auto k = static_cast<std::size_t>(t);
        const double lo = std::min(v[k][0], v[k + 1][0]);
        const double hi = std::max(v[k][0], v[k + 1][0]);
        const double val = interpolate(enc, rows, times, t).values()[0];
        CHECK(val >= lo - 1e-12);
        CHECK(val <= hi + 1e-12);
    }
}

TEST_CASE("zero-order hold is causal") {
    // changing later samples must not affect the value at t
    const std::vector<double> times{0.0, 1.0, 2.0};
    StimulusEncoder enc = StimulusEncoder::identity(1, Interp::ZeroOrderHold);
    Tape tape;
    auto rows_a = enc.encode(tape, {{1.0}, {2.0}, {3.0}}, times);
    auto rows_b = enc.encode(tape, {{1.0}, {2.0}, {-99.0}}, times);
    for (double t : {0.0, 0.3, 1.0, 1.9}) {
        CHECK(interpolate(enc, rows_a, times, t).values()[0] ==
              interpolate(enc, rows_b, times, t).values()[0]);
    }
}

TEST_CASE("queries outside the sample range refuse to extrapolate") {
    StimulusEncoder enc = StimulusEncoder::identity(1);
    Tape tape;
    auto rows = enc.encode(tape, {{0.0}, {1.0}}, {0.0, 1.0});
    CHECK_THROWS_AS(interpolate(enc, rows, {0.0, 1.0}, -0.1), ParamError);
    CHECK_THROWS_AS(interpolate(enc, rows, {0.0, 1.0}, 1.5), ParamError);
}

TEST_CASE("encode validates sample dimensions and time order") {
    StimulusEncoder enc = StimulusEncoder::identity(2);
    Tape tape;
    CHECK_THROWS_AS(enc.encode(tape, {{1.0}}, {0.0}), ParamError);
    CHECK_THROWS_AS(enc.encode(tape, {{1.0, 2.0}, {1.0, 2.0}}, {1.0, 0.5}), ParamError);
}

TEST_CASE("learnable encoder gradients flow through interpolation") {
    StimulusEncoder enc = StimulusEncoder::affine(2, 2);
    enc.init(8);
    std::vector<Param*> params;
    enc.collect(params);
    const std::vector<double> times{0.0, 1.0};
    std::vector<std::vector<double>> v{{0.5, -1.0}, {1.5, 0.25}};
    CHECK(grad_check_params(
              [&](Tape& tape) {
                  auto rows = enc.encode(tape, v, times);
                  return sum(square(interpolate(enc, rows, times, 0.3)));
              },
              params, 1e-5) < 1e-6);
}

} // TEST_SUITE
