// Timing comparison of the OpenMP ensemble/batch kernels against the serial
// reference paths; also checks that both produce identical bits.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "udekit/ensemble.hpp"
#include "udekit/inference.hpp"
#include "udekit/models.hpp"

using namespace udekit;

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

SdeSystem ou_system(const DriftSpec& drift, double b, int dim) {
    SdeSystem sys;
    sys.noise = NoiseKind::AdditiveDiagonal;
    sys.state_dim = dim;
    sys.input_dim = 0;
    sys.noise_dim = dim;
    sys.drift = [&drift](Tape& tape, const Tensor& x, const Tensor& u, double t) {
        return eval_drift(tape, drift, x, u, t);
    };
    sys.diffusion = [b, dim](Tape& tape, const Tensor&, const Tensor&, double) {
        std::vector<double> v(static_cast<std::size_t>(dim), b);
        return tape.constants(v);
    };
    return sys;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx   bits %s\n", name,
                serial_ms, parallel_ms, serial_ms / parallel_ms, identical ? "equal" : "DIFFER");
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("openmp max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without openmp; both lanes run serially\n");
#endif

    // ensemble kernel: 2048 OU paths x 1000 Euler-Maruyama steps
    {
        DriftSpec drift = OuDrift(1, 1.0, 2.0);
        SdeSystem sys = ou_system(drift, 0.4, 1);
        const std::vector<double> x0{0.0};
        const int paths = 2048;

        const double t0 = now_ms();
        auto serial = sample_final_states(sys, x0, nullptr, SolveMethod::EulerMaruyama, 0.0, 1.0,
                                          1e-3, 42, paths, false);
        const double t1 = now_ms();
        auto parallel = sample_final_states(sys, x0, nullptr, SolveMethod::EulerMaruyama, 0.0, 1.0,
                                            1e-3, 42, paths, true);
        const double t2 = now_ms();
        report("ou ensemble (2048x1000)", t1 - t0, t2 - t1, serial == parallel);
    }

    // batch-gradient kernel: one training epoch over 32 trajectories
    {
        GeneratorSpec g;
        g.drift = OuDrift(1, 1.5, 0.5);
        g.diffusion_b = {0.3};
        g.observation = ObservationModel::gaussian_identity(1, 0.1);
        g.x0_kind = GeneratorSpec::X0Kind::Normal;
        g.x0_mean = {0.0};
        g.x0_std = 0.5;
        g.trajectories = 32;
        g.samples = 100;
        g.dt = 0.01;
        g.seed = 7;
        TrajectoryDataset ds = generate_dataset(g);

        auto make_model = [&]() {
            LatentUdeModel model;
            model.latent_dim = 1;
            model.input_dim = 0;
            model.obs_dim = 1;
            model.encoder = StimulusEncoder::identity(0);
            model.recognition = RecognitionModel(1, 0, 16, 1);
            model.recognition.init(3);
            model.prior_drift = OuDrift(1, 1.0, 0.0);
            model.posterior_drift = NeuralDrift(1, 1, {32});
            Rng rng(derive_seed(3, "posterior"));
            model.posterior_drift.net.init(rng);
            model.diffusion = ConstantDiagonal(1, 0.1);
            model.observation = ObservationModel::gaussian_identity(1, 0.15);
            return model;
        };

        TrainConfig tc;
        tc.lr = 0.01;
        tc.epochs = 1;
        tc.batch_size = 32;
        tc.seed = 11;
        tc.window = WindowDist::fixed(8);

        LatentUdeModel m1 = make_model();
        tc.parallel = false;
        const double t0 = now_ms();
        TrainResult r1 = train(m1, ds, tc);
        const double t1 = now_ms();

        LatentUdeModel m2 = make_model();
        tc.parallel = true;
        TrainResult r2 = train(m2, ds, tc);
        const double t2 = now_ms();

        bool identical = r1.history.size() == r2.history.size();
        for (std::size_t i = 0; identical && i < r1.history.size(); ++i) {
            identical = r1.history[i].elbo == r2.history[i].elbo &&
                        r1.history[i].loglik == r2.history[i].loglik &&
                        r1.history[i].kl == r2.history[i].kl;
        }
        report("train epoch (32 traj)", t1 - t0, t2 - t1, identical);
    }
    return 0;
}
