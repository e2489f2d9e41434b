#include "udekit/inference.hpp"

#include <algorithm>
#include <cmath>

#include "udekit/ensemble.hpp"
#include "udekit/rng.hpp"

namespace udekit {

// ---- model wiring ------------------------------------------------------------

void LatentUdeModel::validate() const {
    if (latent_dim < 1) throw ConfigError("model: latent dim must be >= 1");
    if (obs_dim < 1) throw ConfigError("model: observation dim must be >= 1");
    if (!(sigma_floor > 0.0)) throw ConfigError("model: diffusion floor must be positive");
    if (drift_dim(prior_drift) != latent_dim) {
        throw ConfigError("model: prior drift dim " + std::to_string(drift_dim(prior_drift)) +
                          " != latent dim " + std::to_string(latent_dim));
    }
    if (auto du = drift_input_dim(prior_drift); du && *du != input_dim) {
        throw ConfigError("model: prior drift expects input dim " + std::to_string(*du) +
                          ", encoder provides " + std::to_string(input_dim));
    }
    if (posterior_drift.dim != latent_dim) {
        throw ConfigError("model: posterior drift dim mismatch");
    }
    if (posterior_drift.input_dim != input_dim + obs_dim) {
        throw ConfigError("model: posterior drift context dim " +
                          std::to_string(posterior_drift.input_dim) + " != input dim + obs dim " +
                          std::to_string(input_dim + obs_dim));
    }
    if (diffusion_dim(diffusion) != latent_dim) {
        throw ConfigError("model: diffusion dim mismatch");
    }
    if (const auto* sd = std::get_if<StateDependentDiagonal>(&diffusion);
        sd && sd->input_dim != input_dim) {
        throw ConfigError("model: state-dependent diffusion input dim mismatch");
    }
    if (encoder.out_dim != input_dim) {
        throw ConfigError("model: encoder output dim " + std::to_string(encoder.out_dim) +
                          " != input dim " + std::to_string(input_dim));
    }
    if (recognition.obs_dim != obs_dim || recognition.input_dim != input_dim ||
        recognition.latent_dim != latent_dim) {
        throw ConfigError("model: recognition dims do not match (obs, input, latent)");
    }
    if (recognition.probabilistic != probabilistic_x0) {
        throw ConfigError("model: recognition readout mode does not match probabilistic_x0");
    }
    if (observation.latent_dim != latent_dim || observation.obs_dim != obs_dim) {
        throw ConfigError("model: observation dims do not match");
    }
}

std::vector<ParamGroup> LatentUdeModel::param_groups() {
    std::vector<ParamGroup> groups;
    {
        ParamGroup g{"encoder", {}};
        encoder.collect(g.params);
        groups.push_back(std::move(g));
    }
    {
        ParamGroup g{"recognition", {}};
        recognition.collect(g.params);
        groups.push_back(std::move(g));
    }
    {
        ParamGroup g{"prior", {}};
        collect_drift_params(prior_drift, g.params);
        groups.push_back(std::move(g));
    }
    {
        ParamGroup g{"posterior", {}};
        posterior_drift.net.collect(g.params);
        groups.push_back(std::move(g));
    }
    {
        ParamGroup g{"diffusion", {}};
        collect_diffusion_params(diffusion, g.params);
        groups.push_back(std::move(g));
    }
    {
        ParamGroup g{"observation", {}};
        observation.collect(g.params);
        groups.push_back(std::move(g));
    }
    return groups;
}

std::vector<Param*> LatentUdeModel::all_params() {
    std::vector<Param*> out;
    for (auto& g : param_groups()) {
        out.insert(out.end(), g.params.begin(), g.params.end());
    }
    return out;
}

Tensor model_diffusion(Tape& tape, const LatentUdeModel& model, const Tensor& x,
                       const Tensor& u, double t) {
    Tensor raw = eval_diffusion(tape, model.diffusion, x, u, t);
    Tensor sig = add(raw, tape.constant(model.sigma_floor));
    for (double v : sig.values()) {
        if (!(v >= model.sigma_floor)) {
            throw Error("internal: diffusion channel fell below the positive floor");
        }
    }
    return sig;
}

// ---- shared rollout machinery ----------------------------------------------------

namespace {

Tensor concat_or(const Tensor& a, const Tensor& b) {
    if (a.shape().numel() == 0) return b;
    if (b.shape().numel() == 0) return a;
    return concat(a, b);
}

Tensor posterior_mu(Tape& tape, const LatentUdeModel& model, const Tensor& x,
                    const Tensor& u_t, const Tensor& yhat_t) {
    Tensor ctx = concat_or(u_t, yhat_t);
    if (ctx.shape().numel() != model.posterior_drift.input_dim) {
        throw ParamError("posterior drift: context shape " + ctx.shape().str() +
                         " does not match input dim " +
                         std::to_string(model.posterior_drift.input_dim));
    }
    return model.posterior_drift.net.forward(tape, concat_or(x, ctx));
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

struct Rollout {
    std::vector<Tensor> grid_states; // every substep node, length n_grid + 1
    std::vector<double> grid_times;
    std::vector<std::size_t> sample_at; // grid index of each sample time
};

// Euler-Maruyama over the sample grid (optionally refined below solver_dt),
// with posterior or prior drift; the Brownian increment for global step g,
// channel ch is keyed by (noise_seed, g, ch).
Rollout roll_path(Tape& tape, const LatentUdeModel& model, bool posterior, const Tensor& x0,
                  const std::vector<double>& times, const InputFn& u_fn, const InputFn& yhat_fn,
                  double solver_dt, std::uint64_t noise_seed) {
    const std::size_t n_samples = times.size();
    Rollout ro;
    ro.grid_states.push_back(x0);
    ro.grid_times.push_back(times.front());
    ro.sample_at.assign(n_samples, 0);

    const int d = model.latent_dim;
    std::vector<double> dw(static_cast<std::size_t>(d));
    std::uint64_t g = 0;
    Tensor x = x0;
    for (std::size_t n = 0; n + 1 < n_samples; ++n) {
        const double interval = times[n + 1] - times[n];
        const int n_sub = solver_dt <= 0.0
                              ? 1
                              : std::max(1, static_cast<int>(std::llround(interval / solver_dt)));
        const double h = interval / static_cast<double>(n_sub);
        const double sd = std::sqrt(h);
        for (int j = 0; j < n_sub; ++j) {
            const double t = times[n] + static_cast<double>(j) * h;
            Tensor u_t = u_fn(tape, t);
            Tensor mu = posterior ? posterior_mu(tape, model, x, u_t, yhat_fn(tape, t))
                                  : eval_drift(tape, model.prior_drift, x, u_t, t);
            Tensor sig = model_diffusion(tape, model, x, u_t, t);
            for (int ch = 0; ch < d; ++ch) {
                dw[static_cast<std::size_t>(ch)] =
                    sd * normal_at(noise_seed, g, static_cast<std::uint64_t>(ch));
            }
            ++g;
            x = add(add(x, scale(mu, h)), mul(sig, tape.constants(dw)));
            if (!all_finite(x.values())) {
                throw IntegrationError(std::string(posterior ? "posterior" : "prior") +
                                       " path: non-finite state at grid step " + std::to_string(g - 1) +
                                       " (t=" + std::to_string(t + h) + ")");
            }
            ro.grid_states.push_back(x);
            ro.grid_times.push_back(j + 1 == n_sub ? times[n + 1]
                                                   : times[n] + static_cast<double>(j + 1) * h);
        }
        ro.sample_at[n + 1] = ro.grid_states.size() - 1;
    }
    return ro;
}

} // namespace

Tensor kl_path_term(Tape& tape, const LatentUdeModel& model,
                    const std::vector<Tensor>& states, const std::vector<double>& times,
                    const InputFn& u_fn, const InputFn& yhat_fn) {
    if (states.size() != times.size() || states.empty()) {
        throw ParamError("kl_path_term: states and times disagree");
    }
    Tensor kl = tape.constant(0.0);
    for (std::size_t i = 0; i + 1 < states.size(); ++i) {
        const double t = times[i];
        const double h = times[i + 1] - times[i];
        const Tensor& x = states[i];
        Tensor u_t = u_fn(tape, t);
        Tensor mu_post = posterior_mu(tape, model, x, u_t, yhat_fn(tape, t));
        Tensor mu_prior = eval_drift(tape, model.prior_drift, x, u_t, t);
        Tensor sig = model_diffusion(tape, model, x, u_t, t);
        Tensor quad = mul(square(sub(mu_post, mu_prior)), exp(scale(log(sig), -2.0)));
        kl = add(kl, scale(sum(quad), 0.5 * h));
    }
    return kl;
}

// ---- ELBO ---------------------------------------------------------------------

ElboResult elbo(Tape& tape, const LatentUdeModel& model, const Trajectory& traj,
                int window_len, double kl_weight, int mc_paths, std::uint64_t seed,
                double solver_dt) {
    model.validate();
    const int n = static_cast<int>(traj.times.size());
    if (window_len < 1 || window_len >= n) {
        throw ParamError("elbo: conditioning window " + std::to_string(window_len) +
                         " must lie in [1, " + std::to_string(n - 1) + "]");
    }
    if (mc_paths < 1) throw ParamError("elbo: need at least one Monte Carlo path");

    // continuous input and observation interpolants
    std::vector<Tensor> u_rows = model.encoder.encode(tape, traj.v, traj.times);
    InputFn u_fn;
    if (model.input_dim == 0) {
        u_fn = [](Tape& tp, double) { return tp.constants({}); };
    } else {
        u_fn = [&model, &u_rows, &traj](Tape&, double t) {
            return interpolate(model.encoder, u_rows, traj.times, t);
        };
    }
    std::vector<Tensor> y_rows;
    y_rows.reserve(traj.y.size());
    for (const auto& row : traj.y) y_rows.push_back(tape.constants(row));
    InputFn yhat_fn = [&y_rows, &traj](Tape&, double t) {
        return interpolate_rows(y_rows, traj.times, t, Interp::Linear);
    };

    // reversed conditioning window (latest sample first)
    std::vector<Tensor> y_rev, u_rev;
    for (int i = window_len - 1; i >= 0; --i) {
        y_rev.push_back(y_rows[static_cast<std::size_t>(i)]);
        if (model.input_dim > 0) u_rev.push_back(u_rows[static_cast<std::size_t>(i)]);
    }

    Tensor objective{nullptr, -1};
    double loglik_acc = 0.0;
    double kl_acc = 0.0;

    Tensor x0_point{nullptr, -1};
    RecognitionModel::GaussianX0 x0_gauss{{nullptr, -1}, {nullptr, -1}};
    if (model.probabilistic_x0) {
        x0_gauss = model.recognition.infer_x0_gaussian(tape, y_rev, u_rev);
    } else {
        x0_point = model.recognition.infer_x0(tape, y_rev, u_rev);
    }

    for (int mc = 0; mc < mc_paths; ++mc) {
        Tensor x0 = x0_point;
        Tensor x0_kl{nullptr, -1};
        if (model.probabilistic_x0) {
            Rng eps_rng(derive_seed(seed, "x0", static_cast<std::uint64_t>(mc)));
            std::vector<double> eps(static_cast<std::size_t>(model.latent_dim));
            for (double& e : eps) e = eps_rng.normal();
            Tensor sd = exp(scale(x0_gauss.log_var, 0.5));
            x0 = add(x0_gauss.mean, mul(sd, tape.constants(eps)));
            // KL(N(mean, var) || N(0, 1))
            Tensor var = exp(x0_gauss.log_var);
            Tensor one = tape.constant(1.0);
            x0_kl = scale(sum(sub(add(var, square(x0_gauss.mean)), add(one, x0_gauss.log_var))), 0.5);
        }

        Rollout ro = roll_path(tape, model, true, x0, traj.times, u_fn, yhat_fn, solver_dt,
                               derive_seed(seed, "bm", static_cast<std::uint64_t>(mc)));

        Tensor loglik{nullptr, -1};
        for (int i = window_len; i < n; ++i) {
            Tensor term = model.observation.log_likelihood(
                tape, traj.y[static_cast<std::size_t>(i)],
                ro.grid_states[ro.sample_at[static_cast<std::size_t>(i)]]);
            loglik = loglik.valid() ? add(loglik, term) : term;
        }
        Tensor kl = kl_path_term(tape, model, ro.grid_states, ro.grid_times, u_fn, yhat_fn);
        if (x0_kl.valid()) kl = add(kl, x0_kl);
        Tensor obj = sub(loglik, scale(kl, kl_weight));

        loglik_acc += loglik.scalar_value();
        kl_acc += kl.scalar_value();
        objective = objective.valid() ? add(objective, obj) : obj;
    }
    if (mc_paths > 1) objective = scale(objective, 1.0 / static_cast<double>(mc_paths));

    ElboResult res;
    res.objective = objective;
    res.diag.loglik = loglik_acc / static_cast<double>(mc_paths);
    res.diag.kl = kl_acc / static_cast<double>(mc_paths);
    res.diag.elbo = objective.scalar_value();
    return res;
}

// ---- training --------------------------------------------------------------------

void TrainConfig::validate() const {
    if (lr < 0.0) throw ConfigError("train: learning rate must be nonnegative");
    if (epochs < 0) throw ConfigError("train: epochs must be nonnegative");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (mc_paths < 1) throw ConfigError("train: mc paths must be >= 1");
    if (solver_dt < 0.0) throw ConfigError("train: solver dt must be nonnegative");
    if (anneal_frac < 0.0 || anneal_frac > 1.0) throw ConfigError("train: anneal fraction must lie in [0, 1]");
    if (window.c_min < 1 || window.c_max < window.c_min) throw ConfigError("train: invalid window bounds");
}

void AdamState::ensure_size(std::size_t n) {
    if (m.empty()) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    } else if (m.size() != n || v.size() != n) {
        throw ConfigError("optimizer state size " + std::to_string(m.size()) +
                          " does not match parameter count " + std::to_string(n));
    }
}

void AdamState::step(std::vector<Param*>& params, const std::vector<double>& grad, double lr) {
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    std::size_t k = 0;
    for (Param* p : params) {
        for (double& value : p->value) {
            const double g = grad[k];
            m[k] = beta1 * m[k] + (1.0 - beta1) * g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
            value -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
            ++k;
        }
    }
    if (k != grad.size()) {
        throw ConfigError("optimizer: gradient length does not match parameter layout");
    }
}

double kl_anneal_weight(int epoch, int total_epochs, double anneal_frac) {
    const int anneal_epochs = static_cast<int>(std::ceil(anneal_frac * static_cast<double>(total_epochs)));
    if (anneal_epochs <= 0) return 1.0;
    return std::min(1.0, static_cast<double>(epoch) / static_cast<double>(anneal_epochs));
}

namespace {

std::size_t flat_dim(const std::vector<Param*>& params) {
    std::size_t d = 0;
    for (const Param* p : params) d += static_cast<std::size_t>(p->numel());
    return d;
}

std::vector<double> flat_gradient(const Tape& tape, const Gradients& g,
                                  const std::vector<Param*>& params) {
    std::vector<double> out;
    out.reserve(flat_dim(params));
    for (const Param* p : params) {
        Tensor leaf = tape.find_staged(*p);
        if (!leaf.valid()) {
            out.insert(out.end(), static_cast<std::size_t>(p->numel()), 0.0);
        } else {
            auto gv = g.at(leaf);
            out.insert(out.end(), gv.begin(), gv.end());
        }
    }
    return out;
}

int resolve_window(const TrajectoryDataset& ds, const WindowDist& dist, Rng& rng, int n) {
    int c = ds.pre_samples > 0 ? ds.pre_samples : sample_window_length(dist, rng);
    if (c >= n) {
        throw ConfigError("conditioning window " + std::to_string(c) +
                          " leaves no samples to score (trajectory has " + std::to_string(n) + ")");
    }
    return c;
}

void check_compat(const LatentUdeModel& model, const TrajectoryDataset& ds) {
    if (ds.obs_dim != model.obs_dim) {
        throw DataError("dataset observation dim " + std::to_string(ds.obs_dim) +
                        " does not match model dim " + std::to_string(model.obs_dim));
    }
    if (ds.stim_dim != model.encoder.stim_dim) {
        throw DataError("dataset stimulus dim " + std::to_string(ds.stim_dim) +
                        " does not match encoder dim " + std::to_string(model.encoder.stim_dim));
    }
    const bool poisson_model = model.observation.kind == ObservationModel::Kind::Poisson;
    const bool poisson_data = ds.modality == Modality::Poisson;
    if (poisson_model != poisson_data) {
        throw DataError(std::string("dataset modality '") + modality_name(ds.modality) +
                        "' does not match the observation model");
    }
}

} // namespace

TrainResult train(LatentUdeModel& model, const TrajectoryDataset& ds, const TrainConfig& config,
                  AdamState* state, int start_epoch) {
    config.validate();
    ds.validate();
    model.validate();
    check_compat(model, ds);

    std::vector<Param*> params = model.all_params();
    const std::size_t dim = flat_dim(params);
    AdamState local;
    AdamState* opt = state ? state : &local;
    opt->ensure_size(dim);

    const int K = static_cast<int>(ds.trajectories.size());
    TrainResult result;
    for (int e = start_epoch; e < config.epochs; ++e) {
        const double w = kl_anneal_weight(e, config.epochs, config.anneal_frac);

        std::vector<int> order(static_cast<std::size_t>(K));
        for (int i = 0; i < K; ++i) order[static_cast<std::size_t>(i)] = i;
        Rng shuffle_rng(derive_seed(config.seed, "shuffle", static_cast<std::uint64_t>(e)));
        for (int i = K - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.below(static_cast<std::uint64_t>(i) + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }

        EpochStats stats;
        for (int batch_start = 0; batch_start < K; batch_start += config.batch_size) {
            const int nb = std::min(config.batch_size, K - batch_start);
            std::vector<std::vector<double>> grads(static_cast<std::size_t>(nb));
            std::vector<ElboDiagnostics> diags(static_cast<std::size_t>(nb));

            parallel_for(nb, config.parallel, [&](int i) {
                const int idx = order[static_cast<std::size_t>(batch_start + i)];
                const Trajectory& traj = ds.trajectories[static_cast<std::size_t>(idx)];
                Rng wrng(derive_seed(config.seed, "window", static_cast<std::uint64_t>(e),
                                     static_cast<std::uint64_t>(idx)));
                const int c = resolve_window(ds, config.window, wrng,
                                             static_cast<int>(traj.times.size()));
                Tape tape;
                ElboResult r = elbo(tape, model, traj, c, w, config.mc_paths,
                                    derive_seed(config.seed, "elbo", static_cast<std::uint64_t>(e),
                                                static_cast<std::uint64_t>(idx)),
                                    config.solver_dt);
                Gradients g = tape.backward(r.objective);
                grads[static_cast<std::size_t>(i)] = flat_gradient(tape, g, params);
                diags[static_cast<std::size_t>(i)] = r.diag;
            });

            // merge in batch order: deterministic for any thread count
            std::vector<double> gmean(dim, 0.0);
            for (int i = 0; i < nb; ++i) {
                const auto& gi = grads[static_cast<std::size_t>(i)];
                const auto& di = diags[static_cast<std::size_t>(i)];
                bool finite = std::isfinite(di.elbo);
                for (double x : gi) finite = finite && std::isfinite(x);
                if (!finite) {
                    throw TrainError("non-finite loss at epoch " + std::to_string(e) + ", batch " +
                                     std::to_string(batch_start / config.batch_size) +
                                     ", trajectory " +
                                     std::to_string(order[static_cast<std::size_t>(batch_start + i)]));
                }
                for (std::size_t d = 0; d < dim; ++d) gmean[d] += gi[d];
                stats.elbo += di.elbo;
                stats.loglik += di.loglik;
                stats.kl += di.kl;
            }
            // ascend the ELBO: descend on its negation
            for (std::size_t d = 0; d < dim; ++d) gmean[d] = -gmean[d] / static_cast<double>(nb);
            opt->step(params, gmean, config.lr);
        }
        stats.elbo /= static_cast<double>(K);
        stats.loglik /= static_cast<double>(K);
        stats.kl /= static_cast<double>(K);
        result.history.push_back(stats);
    }
    return result;
}

// ---- evaluation-mode sampling -----------------------------------------------------

LatentPathSet posterior_latents(const LatentUdeModel& model, const Trajectory& traj,
                                int window_len, int n_paths, std::uint64_t seed,
                                double solver_dt) {
    model.validate();
    LatentPathSet out;
    out.times = traj.times;
    if (n_paths <= 0) return out;

    Tape tape;
    tape.set_grad_enabled(false);
    std::vector<Tensor> u_rows = model.encoder.encode(tape, traj.v, traj.times);
    InputFn u_fn;
    if (model.input_dim == 0) {
        u_fn = [](Tape& tp, double) { return tp.constants({}); };
    } else {
        u_fn = [&model, &u_rows, &traj](Tape&, double t) {
            return interpolate(model.encoder, u_rows, traj.times, t);
        };
    }
    std::vector<Tensor> y_rows;
    for (const auto& row : traj.y) y_rows.push_back(tape.constants(row));
    InputFn yhat_fn = [&y_rows, &traj](Tape&, double t) {
        return interpolate_rows(y_rows, traj.times, t, Interp::Linear);
    };

    std::vector<Tensor> y_rev, u_rev;
    for (int i = window_len - 1; i >= 0; --i) {
        y_rev.push_back(y_rows[static_cast<std::size_t>(i)]);
        if (model.input_dim > 0) u_rev.push_back(u_rows[static_cast<std::size_t>(i)]);
    }
    Tensor x0 = model.probabilistic_x0
                    ? model.recognition.infer_x0_gaussian(tape, y_rev, u_rev).mean
                    : model.recognition.infer_x0(tape, y_rev, u_rev);

    for (int p = 0; p < n_paths; ++p) {
        Rollout ro = roll_path(tape, model, true, x0, traj.times, u_fn, yhat_fn, solver_dt,
                               derive_seed(seed, "bm", static_cast<std::uint64_t>(p)));
        std::vector<std::vector<double>> latent, readout;
        latent.reserve(traj.times.size());
        readout.reserve(traj.times.size());
        for (std::size_t nidx = 0; nidx < traj.times.size(); ++nidx) {
            const Tensor& x = ro.grid_states[ro.sample_at[nidx]];
            auto xv = x.values();
            latent.emplace_back(xv.begin(), xv.end());
            auto rv = model.observation.mean_or_rate(tape, x).values();
            readout.emplace_back(rv.begin(), rv.end());
        }
        out.latents.push_back(std::move(latent));
        out.readouts.push_back(std::move(readout));
    }
    return out;
}

std::vector<GeneratedTrajectory> prior_simulate(const LatentUdeModel& model,
                                                const std::vector<std::vector<double>>& v_samples,
                                                const std::vector<double>& times,
                                                std::span<const double> x0, int n_paths,
                                                std::uint64_t seed, double solver_dt) {
    model.validate();
    if (static_cast<int>(x0.size()) != model.latent_dim) {
        throw ParamError("prior_simulate: x0 has " + std::to_string(x0.size()) +
                         " channels, expected " + std::to_string(model.latent_dim));
    }
    std::vector<GeneratedTrajectory> out;
    if (n_paths <= 0) return out;

    Tape tape;
    tape.set_grad_enabled(false);
    std::vector<Tensor> u_rows = model.encoder.encode(tape, v_samples, times);
    InputFn u_fn;
    if (model.input_dim == 0) {
        u_fn = [](Tape& tp, double) { return tp.constants({}); };
    } else {
        u_fn = [&model, &u_rows, &times](Tape&, double t) {
            return interpolate(model.encoder, u_rows, times, t);
        };
    }
    Tensor x0_t = tape.leaf(Shape::vec(model.latent_dim), x0, false);

    for (int p = 0; p < n_paths; ++p) {
        Rollout ro = roll_path(tape, model, false, x0_t, times, u_fn, nullptr, solver_dt,
                               derive_seed(seed, "bm", static_cast<std::uint64_t>(p)));
        GeneratedTrajectory gt;
        gt.times = times;
        Rng obs_rng(derive_seed(seed, "obs", static_cast<std::uint64_t>(p)));
        for (std::size_t nidx = 0; nidx < times.size(); ++nidx) {
            const Tensor& x = ro.grid_states[ro.sample_at[nidx]];
            auto xv = x.values();
            std::vector<double> xcopy(xv.begin(), xv.end());
            auto rv = model.observation.mean_or_rate(tape, x).values();
            gt.obs_mean.emplace_back(rv.begin(), rv.end());
            gt.obs.push_back(model.observation.sample(xcopy, obs_rng));
            gt.latent.push_back(std::move(xcopy));
        }
        out.push_back(std::move(gt));
    }
    return out;
}

EvalMetrics evaluate(const LatentUdeModel& model, const TrajectoryDataset& ds, int n_paths,
                     std::uint64_t seed, const WindowDist& window, bool parallel) {
    model.validate();
    ds.validate();
    check_compat(model, ds);
    if (n_paths < 1) throw ParamError("evaluate: need at least one path");

    const int K = static_cast<int>(ds.trajectories.size());
    EvalMetrics metrics;
    metrics.per_traj_loglik_per_step.resize(static_cast<std::size_t>(K));
    metrics.per_traj_rmse.resize(static_cast<std::size_t>(K));
    metrics.per_traj_kl_rate.resize(static_cast<std::size_t>(K));

    parallel_for(K, parallel, [&](int k) {
        const Trajectory& traj = ds.trajectories[static_cast<std::size_t>(k)];
        const int n = static_cast<int>(traj.times.size());
        // deterministic window: the marked pre-task segment, else the
        // distribution's lower bound
        const int c = ds.pre_samples > 0 ? ds.pre_samples : window.c_min;
        if (c >= n) throw ConfigError("evaluate: window leaves no samples to score");

        Tape tape;
        tape.set_grad_enabled(false);
        ElboResult r = elbo(tape, model, traj, c, 1.0, n_paths,
                            derive_seed(seed, "eval-elbo", static_cast<std::uint64_t>(k)), 0.0);
        const int n_eval = n - c;
        const double span = traj.times.back() - traj.times.front();
        metrics.per_traj_loglik_per_step[static_cast<std::size_t>(k)] =
            (r.diag.loglik - r.diag.kl) / static_cast<double>(n_eval);
        metrics.per_traj_kl_rate[static_cast<std::size_t>(k)] = r.diag.kl / span;

        LatentPathSet ps = posterior_latents(model, traj, c, n_paths,
                                             derive_seed(seed, "eval-paths", static_cast<std::uint64_t>(k)));
        double se = 0.0;
        std::size_t count = 0;
        for (int i = c; i < n; ++i) {
            for (int j = 0; j < model.obs_dim; ++j) {
                double pred = 0.0;
                for (int p = 0; p < n_paths; ++p) {
                    pred += ps.readouts[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)]
                                       [static_cast<std::size_t>(j)];
                }
                pred /= static_cast<double>(n_paths);
                const double diff = pred - traj.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                se += diff * diff;
                ++count;
            }
        }
        metrics.per_traj_rmse[static_cast<std::size_t>(k)] = std::sqrt(se / static_cast<double>(count));
    });

    for (int k = 0; k < K; ++k) {
        metrics.loglik_per_step += metrics.per_traj_loglik_per_step[static_cast<std::size_t>(k)];
        metrics.rmse += metrics.per_traj_rmse[static_cast<std::size_t>(k)];
        metrics.kl_per_unit_time += metrics.per_traj_kl_rate[static_cast<std::size_t>(k)];
    }
    metrics.loglik_per_step /= static_cast<double>(K);
    metrics.rmse /= static_cast<double>(K);
    metrics.kl_per_unit_time /= static_cast<double>(K);
    return metrics;
}

// ---- ground-truth generation -------------------------------------------------------

TrajectoryDataset generate_dataset(const GeneratorSpec& g, bool parallel) {
    const int d = drift_dim(g.drift);
    if (g.trajectories < 1) throw ConfigError("generator: need at least one trajectory");
    if (g.samples < 2) throw ConfigError("generator: need at least two samples");
    if (!(g.dt > 0.0)) throw ConfigError("generator: dt must be positive");
    if (static_cast<int>(g.diffusion_b.size()) != d) {
        throw ConfigError("generator: diffusion has " + std::to_string(g.diffusion_b.size()) +
                          " channels for latent dim " + std::to_string(d));
    }
    bool noisy = false;
    for (double b : g.diffusion_b) {
        if (b < 0.0) throw ConfigError("generator: negative diffusion scale");
        noisy = noisy || b > 0.0;
    }
    if (g.method == SolveMethod::Rk4 && noisy) {
        throw ConfigError("generator: rk4 requires zero diffusion");
    }
    if (g.observation.latent_dim != d) {
        throw ConfigError("generator: observation latent dim mismatch");
    }
    if (auto du = drift_input_dim(g.drift); du && *du != g.stim_dim) {
        throw ConfigError("generator: drift expects input dim " + std::to_string(*du) +
                          ", stimulus provides " + std::to_string(g.stim_dim));
    }
    if (g.x0_kind == GeneratorSpec::X0Kind::Fixed || !g.x0_mean.empty()) {
        if (static_cast<int>(g.x0_mean.size()) != d) {
            throw ConfigError("generator: x0 has " + std::to_string(g.x0_mean.size()) +
                              " channels for latent dim " + std::to_string(d));
        }
    }
    if (g.pre_samples < 0 || g.pre_samples >= g.samples) {
        throw ConfigError("generator: pre_samples must lie in [0, samples)");
    }

    std::vector<double> times(static_cast<std::size_t>(g.samples));
    for (int i = 0; i < g.samples; ++i) times[static_cast<std::size_t>(i)] = static_cast<double>(i) * g.dt;

    TrajectoryDataset ds;
    ds.trajectories.resize(static_cast<std::size_t>(g.trajectories));
    ds.stim_dim = g.stim_dim;
    ds.obs_dim = g.observation.obs_dim;
    ds.latent_dim = d;
    ds.modality = g.observation.kind == ObservationModel::Kind::Poisson ? Modality::Poisson
                                                                        : Modality::Gaussian;
    ds.bin_width = g.observation.bin_width;
    ds.pre_samples = g.pre_samples;
    ds.dt = g.dt;
    ds.n_samples = g.samples;
    ds.seed = g.seed;

    SdeSystem sys;
    sys.noise = NoiseKind::AdditiveDiagonal;
    sys.state_dim = d;
    sys.input_dim = g.stim_dim;
    sys.noise_dim = d;
    sys.drift = [&g](Tape& tape, const Tensor& x, const Tensor& u, double t) {
        return eval_drift(tape, g.drift, x, u, t);
    };
    sys.diffusion = [&g](Tape& tape, const Tensor&, const Tensor&, double) {
        return tape.constants(g.diffusion_b);
    };

    parallel_for(g.trajectories, parallel, [&](int k) {
        Trajectory tr;
        tr.times = times;
        tr.v.resize(times.size());
        for (std::size_t nidx = 0; nidx < times.size(); ++nidx) {
            std::vector<double> row(static_cast<std::size_t>(g.stim_dim));
            if (g.stim_kind == GeneratorSpec::StimKind::Sine) {
                for (int j = 0; j < g.stim_dim; ++j) {
                    const double phase = 6.283185307179586 * static_cast<double>(j) /
                                         static_cast<double>(std::max(1, g.stim_dim));
                    row[static_cast<std::size_t>(j)] =
                        g.stim_amplitude *
                        std::sin(6.283185307179586 * g.stim_frequency * times[nidx] + phase);
                }
            }
            tr.v[nidx] = std::move(row);
        }

        std::vector<double> x0 = g.x0_mean.empty() ? std::vector<double>(static_cast<std::size_t>(d), 0.0)
                                                   : g.x0_mean;
        if (g.x0_kind == GeneratorSpec::X0Kind::Normal) {
            Rng x0_rng(derive_seed(g.seed, "x0", static_cast<std::uint64_t>(k)));
            for (double& x : x0) x += g.x0_std * x0_rng.normal();
        }

        Tape tape;
        tape.set_grad_enabled(false);
        std::vector<Tensor> v_rows;
        v_rows.reserve(times.size());
        for (const auto& row : tr.v) v_rows.push_back(tape.constants(row));
        InputFn u_fn;
        if (g.stim_dim == 0) {
            u_fn = [](Tape& tp, double) { return tp.constants({}); };
        } else {
            u_fn = [&v_rows, &times](Tape&, double t) {
                return interpolate_rows(v_rows, times, t, Interp::Linear);
            };
        }

        BrownianPath bm;
        if (g.method != SolveMethod::Rk4) {
            bm = sample_brownian(derive_seed(g.seed, "bm", static_cast<std::uint64_t>(k)),
                                 g.samples - 1, g.dt, d);
        }
        Path path = solve(tape, sys, x0, u_fn, times.front(), times.back(), g.dt, g.method, &bm);

        Rng obs_rng(derive_seed(g.seed, "obs", static_cast<std::uint64_t>(k)));
        tr.y.resize(times.size());
        for (std::size_t nidx = 0; nidx < times.size(); ++nidx) {
            tr.y[nidx] = g.observation.sample(path.states[nidx].values(), obs_rng);
        }
        ds.trajectories[static_cast<std::size_t>(k)] = std::move(tr);
    });

    ds.validate();
    return ds;
}

} // namespace udekit
