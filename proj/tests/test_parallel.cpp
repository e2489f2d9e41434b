#include <doctest.h>

#include <cstring>

#include "helpers.hpp"
#include "model_helpers.hpp"

using namespace udekit;
using namespace udekit::testing;

TEST_SUITE("parallel") {

TEST_CASE("ensemble kernel matches the serial reference bit for bit") {
    SdeSystem sys = make_ou_system(1.0, 2.0, 0.4);
    const std::vector<double> x0{0.0};
    auto serial = sample_final_states(sys, x0, nullptr, SolveMethod::EulerMaruyama, 0.0, 1.0,
                                      0.01, 5, 64, false);
    auto parallel = sample_final_states(sys, x0, nullptr, SolveMethod::EulerMaruyama, 0.0, 1.0,
                                        0.01, 5, 64, true);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t k = 0; k < serial.size(); ++k) CHECK(serial[k] == parallel[k]);
}

TEST_CASE("ensemble reduction matches the serial reference bit for bit") {
    const double e_serial = gbm_strong_error(SolveMethod::Milstein, 1.0 / 64.0, 128, 9);
    SdeSystem sys = make_gbm_system();
    auto errs = ensemble_reduce(
        sys, std::vector<double>{1.0}, nullptr, SolveMethod::Milstein, 0.0, 1.0, 1.0 / 64.0, 9,
        128,
        [](int, const Path& path, const BrownianPath& bm) {
            double w_t = 0.0;
            for (int s = 0; s < bm.n_steps; ++s) w_t += bm.row(s)[0];
            return std::fabs(path.final_state()[0] - std::exp(-0.5 + w_t));
        },
        false);
    double mean = 0.0;
    for (double e : errs) mean += e;
    mean /= static_cast<double>(errs.size());
    CHECK(std::memcmp(&mean, &e_serial, sizeof(double)) == 0);
}

TEST_CASE("batch-gradient training matches the serial reference bit for bit") {
    GeneratorSpec g;
    g.drift = OuDrift(1, 1.2, 0.4);
    g.diffusion_b = {0.25};
    g.observation = ObservationModel::gaussian_identity(1, 0.1);
    g.x0_mean = {0.0};
    g.x0_std = 0.4;
    g.trajectories = 10;
    g.samples = 40;
    g.dt = 0.02;
    g.seed = 55;
    TrajectoryDataset ds = generate_dataset(g, false);

    auto run = [&](bool parallel) {
        LatentUdeModel model = ou_latent_model(3);
        TrainConfig tc;
        tc.lr = 0.01;
        tc.epochs = 3;
        tc.batch_size = 4;
        tc.seed = 13;
        tc.window = WindowDist::fixed(6);
        tc.parallel = parallel;
        TrainResult res = train(model, ds, tc);
        std::vector<double> flat;
        for (Param* p : model.all_params()) {
            flat.insert(flat.end(), p->value.begin(), p->value.end());
        }
        for (const auto& s : res.history) {
            flat.push_back(s.elbo);
            flat.push_back(s.loglik);
            flat.push_back(s.kl);
        }
        return flat;
    };
    auto serial = run(false);
    auto parallel = run(true);
    REQUIRE(serial.size() == parallel.size());
    CHECK(std::memcmp(serial.data(), parallel.data(), serial.size() * sizeof(double)) == 0);
}

TEST_CASE("dataset generation matches the serial reference") {
    GeneratorSpec g;
    g.drift = OuDrift(1, 0.9, -0.1);
    g.diffusion_b = {0.3};
    g.observation = ObservationModel::gaussian_identity(1, 0.2);
    g.x0_mean = {0.0};
    g.x0_std = 1.0;
    g.trajectories = 12;
    g.samples = 25;
    g.dt = 0.04;
    g.seed = 77;
    TrajectoryDataset serial = generate_dataset(g, false);
    TrajectoryDataset parallel = generate_dataset(g, true);
    for (std::size_t k = 0; k < serial.trajectories.size(); ++k) {
        CHECK(serial.trajectories[k].y == parallel.trajectories[k].y);
        CHECK(serial.trajectories[k].v == parallel.trajectories[k].v);
    }
}

TEST_CASE("evaluation matches the serial reference") {
    GeneratorSpec g;
    g.drift = OuDrift(1, 1.0, 0.3);
    g.diffusion_b = {0.2};
    g.observation = ObservationModel::gaussian_identity(1, 0.1);
    g.x0_mean = {0.0};
    g.x0_std = 0.4;
    g.trajectories = 6;
    g.samples = 30;
    g.dt = 0.02;
    g.seed = 88;
    TrajectoryDataset ds = generate_dataset(g, false);
    LatentUdeModel model = ou_latent_model(14);
    EvalMetrics serial = evaluate(model, ds, 3, 21, WindowDist::fixed(5), false);
    EvalMetrics parallel = evaluate(model, ds, 3, 21, WindowDist::fixed(5), true);
    CHECK(serial.loglik_per_step == parallel.loglik_per_step);
    CHECK(serial.rmse == parallel.rmse);
    CHECK(serial.kl_per_unit_time == parallel.kl_per_unit_time);
}

TEST_CASE("the loop reports the lowest-index failure") {
    for (bool parallel : {false, true}) {
        try {
            parallel_for(8, parallel, [](int i) {
                if (i >= 3) throw ParamError("failed at " + std::to_string(i));
            });
            FAIL("expected a failure");
        } catch (const ParamError& e) {
            CHECK(std::string(e.what()) == "failed at 3");
        }
    }
}

} // TEST_SUITE
