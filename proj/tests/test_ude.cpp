#include <doctest.h>

#include <cmath>

#include "udekit/models.hpp"

using namespace udekit;

namespace {

std::vector<double> drift_values(const DriftSpec& spec, const std::vector<double>& x,
                                 const std::vector<double>& u = {}) {
    Tape tape;
    Tensor xt = tape.leaf(Shape::vec(static_cast<int>(x.size())), x, false);
    Tensor ut = tape.constants(u);
    auto v = eval_drift(tape, spec, xt, ut, 0.0).values();
    return {v.begin(), v.end()};
}

} // namespace

TEST_SUITE("ude") {

TEST_CASE("mean-reverting drift vanishes at the resting level") {
    OuDrift ou(3, 1.2, 0.7);
    DriftSpec spec = ou;
    auto v = drift_values(spec, {0.7, 0.7, 0.7});
    for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("phase-coupled drift reduces to the natural frequencies at synchrony") {
    KuramotoDrift k(4);
    k.omega.value = {0.9, 1.1, 1.3, 0.7};
    for (double& v : k.K.value) v = 0.8;
    DriftSpec spec = std::move(k);
    auto v = drift_values(spec, {2.2, 2.2, 2.2, 2.2});
    CHECK(v[0] == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(1.1).epsilon(1e-12));
    CHECK(v[2] == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(v[3] == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("firing-rate drift with zero coupling is pure leak") {
    WilsonCowanDrift wc(2, 0, 2.0);
    DriftSpec spec = std::move(wc);
    auto v = drift_values(spec, {1.0, -1.0});
    CHECK(v[0] == doctest::Approx(-0.5).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("phase drift is invariant to a common phase shift") {
    KuramotoDrift k(3);
    k.omega.value = {0.5, 0.8, 1.1};
    Rng rng(5);
    for (double& v : k.K.value) v = rng.uniform(-1.0, 1.0);
    DriftSpec spec = std::move(k);
    auto v1 = drift_values(spec, {0.3, -0.9, 1.4});
    auto v2 = drift_values(spec, {0.3 + 2.1, -0.9 + 2.1, 1.4 + 2.1});
    for (std::size_t i = 0; i < v1.size(); ++i) {
        CHECK(v1[i] == doctest::Approx(v2[i]).epsilon(1e-9));
    }
}

TEST_CASE("residual phase model with a zeroed network equals the plain model") {
    KuramotoResidualDrift kr(3, {8});
    kr.base.omega.value = {1.0, 0.5, 0.25};
    for (double& v : kr.base.K.value) v = 0.3;
    Rng rng(2);
    kr.residual.init(rng);
    kr.residual.zero_last_layer();

    KuramotoDrift plain(3);
    plain.omega.value = kr.base.omega.value;
    plain.K.value = kr.base.K.value;

    DriftSpec rspec = std::move(kr);
    DriftSpec pspec = std::move(plain);
    const std::vector<double> x{0.2, -0.4, 1.0};
    auto vr = drift_values(rspec, x);
    auto vp = drift_values(pspec, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(vr[i] == vp[i]);
}

TEST_CASE("graph-coupled drift with an empty graph is the local field alone") {
    GraphCoupledDrift g(3, 0, std::vector<double>(9, 0.0), {8}, {4});
    DriftSpec spec = std::move(g);
    init_drift_params(spec, 77);

    NeuralDrift local_only(3, 0, {8});
    local_only.net = std::get<GraphCoupledDrift>(spec).local; // same parameters
    DriftSpec lspec = std::move(local_only);

    const std::vector<double> x{0.5, -0.2, 0.9};
    auto vg = drift_values(spec, x);
    auto vl = drift_values(lspec, x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(vg[i] == vl[i]);
}

TEST_CASE("graph coupling accumulates weighted pairwise terms") {
    // two nodes, edge only 0 <- 1 with weight 2
    GraphCoupledDrift g(2, 0, {0.0, 2.0, 0.0, 0.0}, {4}, {4});
    DriftSpec spec = std::move(g);
    init_drift_params(spec, 3);
    auto& gc = std::get<GraphCoupledDrift>(spec);

    const std::vector<double> x{0.3, -0.6};
    auto v = drift_values(spec, x);

    Tape tape;
    Tensor local = gc.local.forward(tape, tape.constants(x));
    Tensor pair = gc.pair.forward(
        tape, tape.leaf(Shape::vec(2), std::vector<double>{-0.6, 0.3}, false));
    CHECK(v[0] == doctest::Approx(local.values()[0] + 2.0 * pair.values()[0]).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(local.values()[1]).epsilon(1e-12));
}

TEST_CASE("constant diagonal diffusion ignores the state") {
    ConstantDiagonal cd(2);
    cd.set_b(std::vector<double>{0.3, 0.1});
    DiffusionSpec spec = std::move(cd);
    Tape tape;
    for (double xval : {-5.0, 0.0, 17.0}) {
        Tensor x = tape.leaf(Shape::vec(2), std::vector<double>{xval, -xval}, false);
        auto v = eval_diffusion(tape, spec, x, tape.constants({}), 0.0).values();
        CHECK(v[0] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(v[1] == doctest::Approx(0.1).epsilon(1e-12));
    }
}

TEST_CASE("state-dependent diffusion with zero parameters gives ln 2 per channel") {
    StateDependentDiagonal sd(2, 0, {});
    DiffusionSpec spec = std::move(sd);
    Tape tape;
    Tensor x = tape.leaf(Shape::vec(2), std::vector<double>{0.4, -1.0}, false);
    auto v = eval_diffusion(tape, spec, x, tape.constants({}), 0.0).values();
    CHECK(v[0] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(v[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("state-dependent diffusion stays nonnegative on random states") {
    StateDependentDiagonal sd(3, 0, {16});
    DiffusionSpec spec = std::move(sd);
    init_diffusion_params(spec, 19);
    Rng rng(4);
    Tape tape;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> x(3);
        for (double& v : x) v = rng.uniform(-4.0, 4.0);
        Tensor xt = tape.leaf(Shape::vec(3), x, false);
        for (double v : eval_diffusion(tape, spec, xt, tape.constants({}), 0.0).values()) {
            CHECK(v >= 0.0);
        }
        tape.clear();
    }
}

TEST_CASE("initialization is deterministic in the seed") {
    NeuralDrift d1(2, 1, {16, 16});
    NeuralDrift d2(2, 1, {16, 16});
    DriftSpec s1 = std::move(d1);
    DriftSpec s2 = std::move(d2);
    init_drift_params(s1, 123);
    init_drift_params(s2, 123);
    std::vector<Param*> p1, p2;
    collect_drift_params(s1, p1);
    collect_drift_params(s2, p2);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);
}

TEST_CASE("initial weights respect the fan bound and forward is finite") {
    NeuralDrift d(3, 2, {24, 24});
    DriftSpec spec = std::move(d);
    init_drift_params(spec, 55);
    auto& nd = std::get<NeuralDrift>(spec);
    for (std::size_t l = 0; l < nd.net.weights.size(); ++l) {
        const double bound =
            std::sqrt(6.0 / static_cast<double>(nd.net.widths[l] + nd.net.widths[l + 1]));
        for (double w : nd.net.weights[l].value) {
            CHECK(std::fabs(w) <= bound);
        }
        for (double b : nd.net.biases[l].value) CHECK(b == 0.0);
    }
    auto v = drift_values(spec, {0.1, -0.2, 0.3}, {0.5, -0.5});
    for (double x : v) CHECK(std::isfinite(x));
}

TEST_CASE("drift gradients pass the finite-difference check") {
    const double step = 1e-5;
    const double tol = 1e-5;
    const std::vector<double> x{0.4, -0.8};

    SUBCASE("mean-reverting") {
        DriftSpec spec = OuDrift(2, 1.1, -0.3);
        std::vector<Param*> params;
        collect_drift_params(spec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      return sum(square(eval_drift(tape, spec, xt, tape.constants({}), 0.0)));
                  },
                  params, step) < tol);
    }
    SUBCASE("firing-rate") {
        WilsonCowanDrift wc(2, 1, 0.8);
        Rng rng(9);
        for (double& v : wc.J.value) v = rng.uniform(-0.5, 0.5);
        for (double& v : wc.B.value) v = rng.uniform(-0.5, 0.5);
        DriftSpec spec = std::move(wc);
        std::vector<Param*> params;
        collect_drift_params(spec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      Tensor ut = tape.leaf(Shape::vec(1), std::vector<double>{0.7}, false);
                      return sum(square(eval_drift(tape, spec, xt, ut, 0.0)));
                  },
                  params, step) < tol);
    }
    SUBCASE("residual phase model") {
        KuramotoResidualDrift kr(2, {8});
        kr.base.omega.value = {0.4, 0.9};
        kr.base.K.value = {0.2, -0.1, 0.3, 0.5};
        Rng rng(10);
        kr.residual.init(rng);
        DriftSpec spec = std::move(kr);
        std::vector<Param*> params;
        collect_drift_params(spec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      return sum(square(eval_drift(tape, spec, xt, tape.constants({}), 0.0)));
                  },
                  params, step) < tol);
    }
    SUBCASE("graph-coupled") {
        GraphCoupledDrift g(2, 1, {0.0, 1.0, 1.0, 0.0}, {6}, {6});
        DriftSpec spec = std::move(g);
        init_drift_params(spec, 11);
        std::vector<Param*> params;
        collect_drift_params(spec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      Tensor ut = tape.leaf(Shape::vec(1), std::vector<double>{-0.4}, false);
                      return sum(square(eval_drift(tape, spec, xt, ut, 0.0)));
                  },
                  params, step) < tol);
    }
    SUBCASE("neural") {
        NeuralDrift nd(2, 1, {12});
        DriftSpec spec = std::move(nd);
        init_drift_params(spec, 12);
        std::vector<Param*> params;
        collect_drift_params(spec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      Tensor ut = tape.leaf(Shape::vec(1), std::vector<double>{0.2}, false);
                      return sum(square(eval_drift(tape, spec, xt, ut, 0.0)));
                  },
                  params, step) < tol);
    }
    SUBCASE("diffusion families") {
        ConstantDiagonal cd(2, 0.4);
        DiffusionSpec cspec = std::move(cd);
        std::vector<Param*> params;
        collect_diffusion_params(cspec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      return sum(square(eval_diffusion(tape, cspec, xt, tape.constants({}), 0.0)));
                  },
                  params, step) < tol);

        StateDependentDiagonal sd(2, 0, {8});
        DiffusionSpec sspec = std::move(sd);
        init_diffusion_params(sspec, 13);
        params.clear();
        collect_diffusion_params(sspec, params);
        CHECK(grad_check_params(
                  [&](Tape& tape) {
                      Tensor xt = tape.leaf(Shape::vec(2), x, false);
                      return sum(square(eval_diffusion(tape, sspec, xt, tape.constants({}), 0.0)));
                  },
                  params, step) < tol);
    }
}

TEST_CASE("dimension mismatches are parameter errors") {
    DriftSpec spec = OuDrift(2);
    Tape tape;
    Tensor wrong = tape.leaf(Shape::vec(3), std::vector<double>{1, 2, 3}, false);
    CHECK_THROWS_AS(eval_drift(tape, spec, wrong, tape.constants({}), 0.0), ParamError);

    WilsonCowanDrift wc(2, 2);
    DriftSpec wspec = std::move(wc);
    Tensor x = tape.leaf(Shape::vec(2), std::vector<double>{1, 2}, false);
    Tensor bad_u = tape.leaf(Shape::vec(1), std::vector<double>{1}, false);
    CHECK_THROWS_AS(eval_drift(tape, wspec, x, bad_u, 0.0), ParamError);
}

TEST_CASE("positive scales survive the reparameterization round trip") {
    ConstantDiagonal cd(3);
    cd.set_b(std::vector<double>{0.5, 1e-13, 2.0});
    auto b = cd.b();
    CHECK(b[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(b[1] < 1e-15); // clamped to effectively zero
    CHECK(b[2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(cd.set_b(std::vector<double>{-0.1, 0.0, 0.0}), ParamError);
}

} // TEST_SUITE
