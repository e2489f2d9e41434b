#include <doctest.h>

#include <cstring>

#include "udekit/recognition.hpp"

using namespace udekit;

namespace {

std::vector<std::vector<double>> random_rows(Rng& rng, int n, int d) {
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) {
        r.resize(static_cast<std::size_t>(d));
        for (double& v : r) v = rng.uniform(-1.0, 1.0);
    }
    return rows;
}

} // namespace

TEST_SUITE("recognition") {

TEST_CASE("zero weights reduce the estimate to the readout bias") {
    RecognitionModel rec(2, 1, 8, 2);
    rec.bo.value = {0.7, -0.3};
    Tape tape;
    Rng rng(1);
    auto y = random_rows(rng, 5, 2);
    auto u = random_rows(rng, 5, 1);
    Tensor x0 = rec.infer_x0_values(tape, y, u);
    CHECK(x0.values()[0] == 0.7);
    CHECK(x0.values()[1] == -0.3);
}

TEST_CASE("the estimate ignores samples beyond the window") {
    RecognitionModel rec(1, 0, 8, 1);
    rec.init(4);
    Rng rng(2);
    // full series of 10 samples; window covers the first 4 (reversed)
    auto series = random_rows(rng, 10, 1);
    auto window_of = [&](const std::vector<std::vector<double>>& s) {
        std::vector<std::vector<double>> w;
        for (int i = 3; i >= 0; --i) w.push_back(s[static_cast<std::size_t>(i)]);
        return w;
    };
    Tape t1, t2;
    auto mutated = series;
    for (std::size_t i = 4; i < mutated.size(); ++i) mutated[i][0] += 100.0;
    const double a = rec.infer_x0_values(t1, window_of(series), {}).values()[0];
    const double b = rec.infer_x0_values(t2, window_of(mutated), {}).values()[0];
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
}

TEST_CASE("no-future-leak holds on randomized cases") {
    RecognitionModel rec(2, 1, 12, 2);
    rec.init(9);
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 6 + static_cast<int>(rng.below(10));
        const int c = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - 1)));
        auto y = random_rows(rng, n, 2);
        auto u = random_rows(rng, n, 1);
        auto y2 = y;
        auto u2 = u;
        for (std::size_t i = static_cast<std::size_t>(c); i < y2.size(); ++i) {
            y2[i][0] = rng.uniform(-50.0, 50.0);
            y2[i][1] = rng.uniform(-50.0, 50.0);
            u2[i][0] = rng.uniform(-50.0, 50.0);
        }
        auto rev = [&](const std::vector<std::vector<double>>& rows) {
            std::vector<std::vector<double>> w;
            for (int i = c - 1; i >= 0; --i) w.push_back(rows[static_cast<std::size_t>(i)]);
            return w;
        };
        Tape t1, t2;
        auto v1 = rec.infer_x0_values(t1, rev(y), rev(u)).values();
        auto v2 = rec.infer_x0_values(t2, rev(y2), rev(u2)).values();
        CHECK(std::memcmp(v1.data(), v2.data(), v1.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("estimates are deterministic given parameters and window") {
    RecognitionModel rec(1, 0, 16, 1);
    rec.init(12);
    Rng rng(3);
    auto y = random_rows(rng, 7, 1);
    Tape t1, t2;
    const double a = rec.infer_x0_values(t1, y, {}).values()[0];
    const double b = rec.infer_x0_values(t2, y, {}).values()[0];
    CHECK(std::memcmp(&a, &b, sizeof(double)) == 0);
}

TEST_CASE("cell gradients pass the finite-difference check") {
    RecognitionModel rec(1, 1, 6, 1);
    rec.init(21);
    Rng rng(5);
    auto y = random_rows(rng, 5, 1);
    auto u = random_rows(rng, 5, 1);
    std::vector<Param*> params;
    rec.collect(params);
    const double err = grad_check_params(
        [&](Tape& tape) { return sum(square(rec.infer_x0_values(tape, y, u))); }, params, 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("probabilistic mode reads out mean and log-variance") {
    RecognitionModel rec(1, 0, 8, 2, true);
    rec.bo.value = {0.1, 0.2, -1.0, -2.0};
    Tape tape;
    Rng rng(6);
    auto y = random_rows(rng, 3, 1);
    std::vector<Tensor> y_rows;
    for (const auto& r : y) y_rows.push_back(tape.constants(r));
    auto g = rec.infer_x0_gaussian(tape, y_rows, {});
    CHECK(g.mean.values()[0] == 0.1);
    CHECK(g.mean.values()[1] == 0.2);
    CHECK(g.log_var.values()[0] == -1.0);
    CHECK(g.log_var.values()[1] == -2.0);

    RecognitionModel point(1, 0, 8, 2);
    CHECK_THROWS_AS(point.infer_x0_gaussian(tape, y_rows, {}), ParamError);
}

TEST_CASE("window length sampling covers its support") {
    CHECK_THROWS_AS(WindowDist::uniform(0, 4), ConfigError);
    CHECK_THROWS_AS(WindowDist::uniform(5, 4), ConfigError);

    Rng rng(8);
    WindowDist fixed = WindowDist::fixed(8);
    for (int i = 0; i < 50; ++i) CHECK(sample_window_length(fixed, rng) == 8);

    WindowDist degenerate = WindowDist::uniform(4, 4);
    for (int i = 0; i < 50; ++i) CHECK(sample_window_length(degenerate, rng) == 4);

    WindowDist wide = WindowDist::uniform(2, 10);
    std::vector<int> seen(11, 0);
    for (int i = 0; i < 10'000; ++i) {
        const int c = sample_window_length(wide, rng);
        REQUIRE(c >= 2);
        REQUIRE(c <= 10);
        ++seen[static_cast<std::size_t>(c)];
    }
    for (int c = 2; c <= 10; ++c) CHECK(seen[static_cast<std::size_t>(c)] > 0);
}

TEST_CASE("window length mismatches are parameter errors") {
    RecognitionModel rec(1, 1, 4, 1);
    Tape tape;
    std::vector<Tensor> y{tape.constants(std::vector<double>{1.0})};
    std::vector<Tensor> u;
    CHECK_THROWS_AS(rec.infer_x0(tape, y, u), ParamError);
    CHECK_THROWS_AS(rec.infer_x0(tape, {}, {}), ParamError);
}

} // TEST_SUITE
