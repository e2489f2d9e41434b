#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udekit/dataset.hpp"
#include "udekit/encoder.hpp"
#include "udekit/models.hpp"
#include "udekit/observation.hpp"
#include "udekit/recognition.hpp"
#include "udekit/sde.hpp"

namespace udekit {

struct ParamGroup {
    std::string name;
    std::vector<Param*> params;
};

// Latent UDE: stimulus encoder, recognition model, prior/posterior SDE pair
// sharing one diffusion, and an observation model. The posterior drift is a
// neural field over (x, u(t), yhat(t)) where yhat linearly interpolates the
// observed responses. Every diffusion channel carries an additive floor that
// keeps the path-KL quotient bounded.
struct LatentUdeModel {
    int latent_dim = 1;
    int input_dim = 0; // d_u, time channel included
    int obs_dim = 1;

    StimulusEncoder encoder;
    RecognitionModel recognition;
    DriftSpec prior_drift = OuDrift(1);
    NeuralDrift posterior_drift;
    DiffusionSpec diffusion = ConstantDiagonal(1);
    ObservationModel observation;
    bool probabilistic_x0 = false;
    double sigma_floor = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
    std::vector<ParamGroup> param_groups();
    std::vector<Param*> all_params();
};

// Shared diffusion with the positive floor applied.
Tensor model_diffusion(Tape& tape, const LatentUdeModel& model, const Tensor& x,
                       const Tensor& u, double t);

// Girsanov path KL between the posterior and prior path measures along a
// sampled posterior path: the left-endpoint Riemann sum of
// 0.5 * sum_channels ((mu_post - mu_prior) / sigma)^2 over the solver grid.
// u_fn/yhat_fn supply the drift inputs at the grid times.
Tensor kl_path_term(Tape& tape, const LatentUdeModel& model,
                    const std::vector<Tensor>& states, const std::vector<double>& times,
                    const InputFn& u_fn, const InputFn& yhat_fn);

struct ElboDiagnostics {
    double elbo = 0.0;
    double loglik = 0.0;
    double kl = 0.0;
};

struct ElboResult {
    Tensor objective; // scalar, on the caller's tape
    ElboDiagnostics diag;
};

// Monte Carlo ELBO of one trajectory: encode the stimulus, infer x0 from the
// reversed conditioning window (the first `window_len` samples), sample
// `mc_paths` posterior paths by Euler-Maruyama, score observations past the
// window and subtract kl_weight times the path KL. solver_dt == 0 steps on
// the data grid; otherwise each sample interval is split into
// round(interval / solver_dt) substeps.
ElboResult elbo(Tape& tape, const LatentUdeModel& model, const Trajectory& traj,
                int window_len, double kl_weight, int mc_paths, std::uint64_t seed,
                double solver_dt = 0.0);

// ---- training -----------------------------------------------------------------

struct TrainConfig {
    double lr = 0.01;
    int epochs = 100;
    int batch_size = 16;
    int mc_paths = 1;
    double solver_dt = 0.0; // 0: step on the data grid
    double anneal_frac = 0.2;
    std::uint64_t seed = 1;
    WindowDist window = WindowDist::fixed(10);
    bool parallel = true;

    void validate() const;
};

// Adaptive-moment ascent state over the model's flattened trainable
// parameters; serialized with checkpoints so a resumed run continues the
// exact trajectory.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<double> m;
    std::vector<double> v;

    void ensure_size(std::size_t n);
    // One descent step on `grad` with rate lr.
    void step(std::vector<Param*>& params, const std::vector<double>& grad, double lr);
};

struct EpochStats {
    double elbo = 0.0;
    double loglik = 0.0;
    double kl = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history; // epochs [start_epoch, config.epochs)
};

// KL weight for an epoch: linear 0 -> 1 over the first anneal_frac of epochs.
double kl_anneal_weight(int epoch, int total_epochs, double anneal_frac);

// Gradient ascent on the mean ELBO. Minibatch order reshuffles every epoch
// from the master seed; per-trajectory gradients may be computed on parallel
// tapes and are merged in batch order, so the result is bit-deterministic for
// any thread count. `state`/`start_epoch` resume a checkpointed run.
TrainResult train(LatentUdeModel& model, const TrajectoryDataset& ds, const TrainConfig& config,
                  AdamState* state = nullptr, int start_epoch = 0);

// ---- evaluation and simulation ----------------------------------------------

struct LatentPathSet {
    std::vector<double> times;
    // [path][sample][channel]
    std::vector<std::vector<std::vector<double>>> latents;
    std::vector<std::vector<std::vector<double>>> readouts; // observation means/rates
};

// Posterior-SDE samples with observation readouts; evaluation mode, nothing
// is recorded for gradients.
LatentPathSet posterior_latents(const LatentUdeModel& model, const Trajectory& traj,
                                int window_len, int n_paths, std::uint64_t seed,
                                double solver_dt = 0.0);

// Generative rollouts of the prior SDE under a given stimulus, plus sampled
// observations. Path p shares its noise key with posterior path p.
struct GeneratedTrajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> latent;   // [sample][d_x]
    std::vector<std::vector<double>> obs_mean; // readout means/rates
    std::vector<std::vector<double>> obs;      // sampled observations
};

std::vector<GeneratedTrajectory> prior_simulate(const LatentUdeModel& model,
                                                const std::vector<std::vector<double>>& v_samples,
                                                const std::vector<double>& times,
                                                std::span<const double> x0, int n_paths,
                                                std::uint64_t seed, double solver_dt = 0.0);

struct EvalMetrics {
    double loglik_per_step = 0.0; // per-observation variational bound (loglik - kl)
    double rmse = 0.0;            // observed vs posterior-mean reconstruction
    double kl_per_unit_time = 0.0;
    std::vector<double> per_traj_loglik_per_step;
    std::vector<double> per_traj_rmse;
    std::vector<double> per_traj_kl_rate;
};

EvalMetrics evaluate(const LatentUdeModel& model, const TrajectoryDataset& ds, int n_paths,
                     std::uint64_t seed, const WindowDist& window, bool parallel = true);

// ---- ground-truth generation ---------------------------------------------------

// True system for synthetic data: a drift from the model zoo, an exact
// constant diagonal diffusion (zero allowed), and an observation sampler.
struct GeneratorSpec {
    DriftSpec drift = OuDrift(1);
    std::vector<double> diffusion_b; // length d_x
    ObservationModel observation;

    enum class X0Kind { Fixed, Normal } x0_kind = X0Kind::Normal;
    std::vector<double> x0_mean;
    double x0_std = 1.0;

    enum class StimKind { None, Sine } stim_kind = StimKind::None;
    int stim_dim = 0;
    double stim_amplitude = 1.0;
    double stim_frequency = 0.5;

    int trajectories = 1;
    int samples = 2;
    double dt = 0.01;
    std::uint64_t seed = 0;
    SolveMethod method = SolveMethod::EulerMaruyama;
    int pre_samples = 0;
};

TrajectoryDataset generate_dataset(const GeneratorSpec& g, bool parallel = true);

} // namespace udekit
