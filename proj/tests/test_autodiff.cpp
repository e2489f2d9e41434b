#include <doctest.h>

#include <cmath>
#include <cstring>

#include "udekit/rng.hpp"
#include "udekit/tensor.hpp"

using namespace udekit;

TEST_SUITE("autodiff") {

TEST_CASE("tanh at zero has unit slope") {
    Tape tape;
    Tensor x = tape.leaf(Shape::scalar(), std::vector<double>{0.0}, true);
    Tensor y = tanh(x);
    CHECK(y.scalar_value() == 0.0);
    Gradients g = tape.backward(y);
    CHECK(g.at(x)[0] == 1.0);
}

TEST_CASE("softplus at zero is ln 2") {
    Tape tape;
    Tensor y = softplus(tape.constant(0.0));
    CHECK(y.scalar_value() == doctest::Approx(0.6931471805599453).epsilon(1e-12));
}

TEST_CASE("matmul against the identity") {
    Tape tape;
    Tensor a = tape.leaf(Shape::mat(2, 2), std::vector<double>{1, 2, 3, 4}, false);
    Tensor eye = tape.leaf(Shape::mat(2, 2), std::vector<double>{1, 0, 0, 1}, false);
    Tensor y = matmul(a, eye);
    auto v = y.values();
    CHECK(v[0] == 1.0);
    CHECK(v[1] == 2.0);
    CHECK(v[2] == 3.0);
    CHECK(v[3] == 4.0);
}

TEST_CASE("d/dx of x squared at 3 is 6") {
    Tape tape;
    Tensor x = tape.leaf(Shape::scalar(), std::vector<double>{3.0}, true);
    Gradients g = tape.backward(sum(square(x)));
    CHECK(g.at(x)[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("sum(tanh(Wx)) gradient matches finite differences") {
    Param W("W", Shape::mat(3, 4));
    Rng rng(17);
    for (double& w : W.value) w = rng.uniform(-1.0, 1.0);
    std::vector<double> x0(4);
    for (double& v : x0) v = rng.uniform(-1.5, 1.5);

    const double err = grad_check(
        [&](Tape& tape, const Tensor& x) { return sum(tanh(matmul(tape.stage(W), x))); }, x0, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("gradient of a constant output is zero") {
    Tape tape;
    Tensor x = tape.leaf(Shape::vec(3), std::vector<double>{1, 2, 3}, true);
    Tensor y = tape.constant(5.0);
    Gradients g = tape.backward(y);
    auto gx = g.at(x);
    CHECK(gx[0] == 0.0);
    CHECK(gx[1] == 0.0);
    CHECK(gx[2] == 0.0);
}

TEST_CASE("grad_check on a quadratic is exact to rounding") {
    const double err = grad_check(
        [](Tape&, const Tensor& x) { return sum(square(x)); },
        std::vector<double>{1.0, -2.0}, 1e-5);
    CHECK(err < 1e-8);
}

TEST_CASE("grad_check on an input-independent function reports zero") {
    const double err = grad_check(
        [](Tape& tape, const Tensor&) { return tape.constant(3.5); },
        std::vector<double>{0.3, -0.7}, 1e-5);
    CHECK(err == 0.0);
}

TEST_CASE("every primitive passes finite differences on random inputs") {
    constexpr double kStep = 1e-5;
    constexpr double kTol = 1e-6;
    Rng rng(99);
    auto random_vec = [&](int n, double lo, double hi) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (double& x : v) x = rng.uniform(lo, hi);
        return v;
    };

    for (int trial = 0; trial < 100; ++trial) {
        // unary primitives
        const auto x = random_vec(4, -2.0, 2.0);
        const auto xpos = random_vec(4, 0.1, 2.0);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(tanh(t)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(softplus(t)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(exp(t)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(log(t)); }, xpos, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(sin(t)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(square(t)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(neg(t)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return sum(scale(t, -1.7)); }, x, kStep) < kTol);
        CHECK(grad_check([](Tape&, const Tensor& t) { return mean(square(t)); }, x, kStep) < kTol);

        // binary elementwise: both operands packed into one leaf via slice
        const auto xy = random_vec(8, -2.0, 2.0);
        CHECK(grad_check(
                  [](Tape&, const Tensor& t) { return sum(add(slice(t, 0, 4), slice(t, 4, 4))); },
                  xy, kStep) < kTol);
        CHECK(grad_check(
                  [](Tape&, const Tensor& t) { return sum(sub(slice(t, 0, 4), slice(t, 4, 4))); },
                  xy, kStep) < kTol);
        CHECK(grad_check(
                  [](Tape&, const Tensor& t) { return sum(mul(slice(t, 0, 4), slice(t, 4, 4))); },
                  xy, kStep) < kTol);
        CHECK(grad_check(
                  [](Tape&, const Tensor& t) {
                      return sum(square(concat(slice(t, 0, 3), slice(t, 3, 5))));
                  },
                  xy, kStep) < kTol);
        // scalar broadcast on either side
        CHECK(grad_check(
                  [](Tape&, const Tensor& t) { return sum(mul(slice(t, 0, 1), slice(t, 1, 7))); },
                  xy, kStep) < kTol);
        CHECK(grad_check(
                  [](Tape&, const Tensor& t) { return sum(add(slice(t, 0, 7), slice(t, 7, 1))); },
                  xy, kStep) < kTol);
    }

    // matmul through parameters (matrix-matrix and matrix-vector)
    Param A("A", Shape::mat(3, 4));
    Param B("B", Shape::mat(4, 2));
    Param v("v", Shape::vec(4));
    for (double& w : A.value) w = rng.uniform(-1.0, 1.0);
    for (double& w : B.value) w = rng.uniform(-1.0, 1.0);
    for (double& w : v.value) w = rng.uniform(-1.0, 1.0);
    Param* mats[] = {&A, &B};
    CHECK(grad_check_params(
              [&](Tape& tape) { return sum(square(matmul(tape.stage(A), tape.stage(B)))); },
              mats, kStep) < kTol);
    Param* mv[] = {&A, &v};
    CHECK(grad_check_params(
              [&](Tape& tape) { return sum(tanh(matmul(tape.stage(A), tape.stage(v)))); },
              mv, kStep) < kTol);
}

TEST_CASE("backward is linear in the output") {
    std::vector<double> x0{0.4, -1.2, 2.0};
    const double a = 1.7, b = -0.6;

    auto grads_of = [&](const std::function<Tensor(Tape&, const Tensor&)>& f) {
        Tape tape;
        Tensor x = tape.leaf(Shape::vec(3), x0, true);
        Gradients g = tape.backward(f(tape, x));
        auto gx = g.at(x);
        return std::vector<double>(gx.begin(), gx.end());
    };

    auto gf = grads_of([](Tape&, const Tensor& x) { return sum(square(x)); });
    auto gg = grads_of([](Tape&, const Tensor& x) { return sum(tanh(x)); });
    auto gh = grads_of([&](Tape&, const Tensor& x) {
        return add(scale(sum(square(x)), a), scale(sum(tanh(x)), b));
    });
    for (std::size_t i = 0; i < gh.size(); ++i) {
        CHECK(gh[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-12));
    }
}

TEST_CASE("identical tapes give bit-identical gradients") {
    auto run = [] {
        Tape tape;
        Tensor x = tape.leaf(Shape::vec(4), std::vector<double>{0.3, -0.8, 1.1, 0.05}, true);
        Tensor y = sum(mul(tanh(x), softplus(scale(x, 0.7))));
        Gradients g = tape.backward(y);
        auto gx = g.at(x);
        return std::vector<double>(gx.begin(), gx.end());
    };
    auto g1 = run();
    auto g2 = run();
    CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("replaying the tape reproduces recorded values bit-exactly") {
    Tape tape;
    Tensor x = tape.leaf(Shape::vec(5), std::vector<double>{0.1, 0.9, -0.4, 2.0, -1.3}, true);
    Tensor y = concat(tanh(slice(x, 0, 2)), exp(scale(slice(x, 2, 3), 0.3)));
    Tensor z = sum(mul(y, y));
    std::vector<double> before;
    for (int id = 0; id < tape.size(); ++id) {
        auto v = tape.values(id);
        before.insert(before.end(), v.begin(), v.end());
    }
    tape.replay();
    std::vector<double> after;
    for (int id = 0; id < tape.size(); ++id) {
        auto v = tape.values(id);
        after.insert(after.end(), v.begin(), v.end());
    }
    CHECK(before.size() == after.size());
    CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
    (void)z;
}

TEST_CASE("shape mismatches name the operation and both shapes") {
    Tape tape;
    Tensor a = tape.leaf(Shape::vec(3), std::vector<double>{1, 2, 3}, false);
    Tensor b = tape.leaf(Shape::vec(2), std::vector<double>{1, 2}, false);
    CHECK_THROWS_WITH_AS(add(a, b), "add: shape mismatch [3] vs [2]", ShapeError);

    Tensor m = tape.leaf(Shape::mat(2, 3), std::vector<double>(6, 1.0), false);
    CHECK_THROWS_AS(matmul(m, b), ShapeError);
}

TEST_CASE("log of a non-positive value is a domain error") {
    Tape tape;
    Tensor x = tape.leaf(Shape::vec(2), std::vector<double>{1.0, -0.5}, false);
    CHECK_THROWS_AS(log(x), DomainError);
}

TEST_CASE("backward rejects non-scalar outputs") {
    Tape tape;
    Tensor x = tape.leaf(Shape::vec(2), std::vector<double>{1.0, 2.0}, true);
    CHECK_THROWS_AS(tape.backward(square(x)), ParamError);
}

TEST_CASE("staging the same parameter twice shares one leaf") {
    Param p("p", Shape::vec(2));
    p.value = {0.5, -0.5};
    Tape tape;
    Tensor a = tape.stage(p);
    Tensor b = tape.stage(p);
    CHECK(a.id == b.id);
    // gradient accumulates across both uses
    Gradients g = tape.backward(sum(add(a, b)));
    CHECK(g.at(a)[0] == 2.0);
}

TEST_CASE("concatenating matrices along both axes") {
    Tape tape;
    Tensor a = tape.leaf(Shape::mat(2, 2), std::vector<double>{1, 2, 3, 4}, false);
    Tensor b = tape.leaf(Shape::mat(1, 2), std::vector<double>{5, 6}, false);
    Tensor rows = concat(a, b, 0);
    CHECK(rows.shape() == Shape::mat(3, 2));
    CHECK(rows.values()[4] == 5.0);

    Tensor c = tape.leaf(Shape::mat(2, 1), std::vector<double>{7, 8}, false);
    Tensor cols = concat(a, c, 1);
    CHECK(cols.shape() == Shape::mat(2, 3));
    CHECK(cols.values()[2] == 7.0);
    CHECK(cols.values()[5] == 8.0);
}

} // TEST_SUITE
