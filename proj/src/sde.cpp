#include "udekit/sde.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "udekit/rng.hpp"

namespace udekit {

SolveMethod solve_method_from_string(const std::string& s) {
    if (s == "euler-maruyama") return SolveMethod::EulerMaruyama;
    if (s == "milstein") return SolveMethod::Milstein;
    if (s == "rk4") return SolveMethod::Rk4;
    throw ParamError("unknown solver method '" + s + "'");
}

const char* solve_method_name(SolveMethod m) {
    switch (m) {
        case SolveMethod::EulerMaruyama: return "euler-maruyama";
        case SolveMethod::Milstein: return "milstein";
        case SolveMethod::Rk4: return "rk4";
    }
    return "?";
}

BrownianPath sample_brownian(std::uint64_t seed, int n_steps, double dt, int dim) {
    if (n_steps < 1) throw ParamError("sample_brownian: n_steps must be >= 1");
    if (!(dt > 0.0)) throw ParamError("sample_brownian: dt must be positive");
    if (dim < 1) throw ParamError("sample_brownian: dim must be >= 1");
    BrownianPath bm;
    bm.seed = seed;
    bm.dt = dt;
    bm.n_steps = n_steps;
    bm.dim = dim;
    bm.increments.resize(static_cast<std::size_t>(n_steps) * static_cast<std::size_t>(dim));
    const double sd = std::sqrt(dt);
    for (int s = 0; s < n_steps; ++s) {
        for (int c = 0; c < dim; ++c) {
            bm.increments[static_cast<std::size_t>(s) * static_cast<std::size_t>(dim) +
                          static_cast<std::size_t>(c)] =
                sd * normal_at(seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(c));
        }
    }
    return bm;
}

namespace {

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::string at_step(double t, int step_index) {
    std::string s = " at t=" + std::to_string(t);
    if (step_index >= 0) s += ", step " + std::to_string(step_index);
    return s;
}

void check_field(const Tensor& v, const char* which, const char* scheme, double t, int step) {
    if (!all_finite(v.values())) {
        throw IntegrationError(std::string(scheme) + ": non-finite " + which + " output" +
                               at_step(t, step));
    }
}

void check_diag_nonneg(const SdeSystem& sys, const Tensor& sig, const char* scheme,
                       double t, int step) {
    if (sys.noise == NoiseKind::General) return;
    for (double x : sig.values()) {
        if (x < 0.0) {
            throw ParamError(std::string(scheme) + ": negative diagonal diffusion output" +
                             at_step(t, step));
        }
    }
}

Tensor eval_drift_checked(const SdeSystem& sys, Tape& tape, const Tensor& x, const Tensor& u,
                          double t, const char* scheme, int step) {
    Tensor mu = sys.drift(tape, x, u, t);
    if (mu.shape().numel() != sys.state_dim) {
        throw ShapeError(std::string(scheme) + ": drift output shape " + mu.shape().str() +
                         " does not match state dim " + std::to_string(sys.state_dim));
    }
    check_field(mu, "drift", scheme, t, step);
    return mu;
}

Tensor eval_diffusion_checked(const SdeSystem& sys, Tape& tape, const Tensor& x, const Tensor& u,
                              double t, const char* scheme, int step) {
    Tensor sig = sys.diffusion(tape, x, u, t);
    const Shape& s = sig.shape();
    if (sys.noise == NoiseKind::General) {
        if (s.rank != 2 || s.d0 != sys.state_dim || s.d1 != sys.noise_dim) {
            throw ShapeError(std::string(scheme) + ": diffusion output shape " + s.str() +
                             " does not match " + std::to_string(sys.state_dim) + "x" +
                             std::to_string(sys.noise_dim));
        }
    } else if (s.rank != 1 || s.d0 != sys.state_dim) {
        throw ShapeError(std::string(scheme) + ": diagonal diffusion output shape " + s.str() +
                         " does not match state dim " + std::to_string(sys.state_dim));
    }
    check_field(sig, "diffusion", scheme, t, step);
    check_diag_nonneg(sys, sig, scheme, t, step);
    return sig;
}

} // namespace

Tensor em_step(const SdeSystem& sys, const Tensor& x, const Tensor& u, double t,
               double dt, std::span<const double> dw, int step_index) {
    if (!(dt > 0.0)) throw ParamError("em_step: dt must be positive");
    if (static_cast<int>(dw.size()) != sys.noise_dim) {
        throw ParamError("em_step: " + std::to_string(dw.size()) + " noise increments for noise dim " +
                         std::to_string(sys.noise_dim));
    }
    Tape& tape = *x.tape;
    Tensor mu = eval_drift_checked(sys, tape, x, u, t, "em_step", step_index);
    Tensor sig = eval_diffusion_checked(sys, tape, x, u, t, "em_step", step_index);
    Tensor dw_t = tape.constants(dw);
    Tensor noise = sys.noise == NoiseKind::General ? matmul(sig, dw_t) : mul(sig, dw_t);
    return add(add(x, scale(mu, dt)), noise);
}

Tensor milstein_step(const SdeSystem& sys, const Tensor& x, const Tensor& u, double t,
                     double dt, std::span<const double> dw, int step_index) {
    if (sys.noise == NoiseKind::General) {
        throw ParamError("milstein_step: general noise is unsupported; use euler-maruyama");
    }
    if (!(dt > 0.0)) throw ParamError("milstein_step: dt must be positive");
    if (static_cast<int>(dw.size()) != sys.noise_dim) {
        throw ParamError("milstein_step: " + std::to_string(dw.size()) +
                         " noise increments for noise dim " + std::to_string(sys.noise_dim));
    }
    Tape& tape = *x.tape;
    Tensor mu = eval_drift_checked(sys, tape, x, u, t, "milstein_step", step_index);
    Tensor sig = eval_diffusion_checked(sys, tape, x, u, t, "milstein_step", step_index);

    // Per-channel d(sigma_i)/d(x_i), evaluated on a scratch tape; the factors
    // enter the main tape as constants.
    const int d = sys.state_dim;
    std::vector<double> deriv(static_cast<std::size_t>(d), 0.0);
    {
        Tape scratch;
        auto xv = x.values();
        auto uv = u.values();
        Tensor xs = scratch.leaf(x.shape(), xv, true);
        Tensor us = scratch.leaf(u.shape(), uv, false);
        Tensor ss = sys.diffusion(scratch, xs, us, t);
        for (int i = 0; i < d; ++i) {
            Gradients g = scratch.backward(slice(ss, i, 1));
            deriv[static_cast<std::size_t>(i)] = g.at(xs)[static_cast<std::size_t>(i)];
        }
    }

    std::vector<double> w2md(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        w2md[static_cast<std::size_t>(i)] = dw[static_cast<std::size_t>(i)] * dw[static_cast<std::size_t>(i)] - dt;
    }
    Tensor dw_t = tape.constants(dw);
    Tensor correction = scale(mul(mul(sig, tape.constants(deriv)), tape.constants(w2md)), 0.5);
    return add(add(add(x, scale(mu, dt)), mul(sig, dw_t)), correction);
}

Tensor rk4_step(const SdeSystem& sys, const Tensor& x, const Tensor& u, double t,
                double dt, int step_index) {
    if (!(dt > 0.0)) throw ParamError("rk4_step: dt must be positive");
    Tape& tape = *x.tape;
    const double h = dt;
    Tensor k1 = eval_drift_checked(sys, tape, x, u, t, "rk4_step", step_index);
    Tensor k2 = eval_drift_checked(sys, tape, add(x, scale(k1, h / 2.0)), u, t + h / 2.0, "rk4_step", step_index);
    Tensor k3 = eval_drift_checked(sys, tape, add(x, scale(k2, h / 2.0)), u, t + h / 2.0, "rk4_step", step_index);
    Tensor k4 = eval_drift_checked(sys, tape, add(x, scale(k3, h)), u, t + h, "rk4_step", step_index);
    Tensor incr = add(add(k1, scale(add(k2, k3), 2.0)), k4);
    return add(x, scale(incr, h / 6.0));
}

int step_count(double t0, double t1, double dt) {
    if (!(dt > 0.0)) throw ParamError("solve: dt must be positive");
    if (t1 < t0) throw ParamError("solve: time span end precedes start");
    const double span = t1 - t0;
    const double steps = span / dt;
    const int n = static_cast<int>(std::llround(steps));
    if (std::fabs(static_cast<double>(n) * dt - span) > 1e-9 * std::fmax(1.0, span)) {
        throw ParamError("solve: span " + std::to_string(span) + " is not an integral multiple of dt " +
                         std::to_string(dt));
    }
    return n;
}

Path solve(const SdeSystem& sys, const Tensor& x0, const InputFn& u_fn,
           double t0, double t1, double dt, SolveMethod method,
           const BrownianPath* bm) {
    Tape& tape = *x0.tape;
    if (x0.shape().numel() != sys.state_dim) {
        throw ShapeError("solve: initial state shape " + x0.shape().str() +
                         " does not match state dim " + std::to_string(sys.state_dim));
    }
    const int n_steps = t1 == t0 ? 0 : step_count(t0, t1, dt);
    const bool stochastic = method != SolveMethod::Rk4;
    if (stochastic && n_steps > 0) {
        if (bm == nullptr) throw ParamError("solve: stochastic method requires a Brownian path");
        if (bm->n_steps < n_steps) {
            throw ParamError("solve: Brownian path covers " + std::to_string(bm->n_steps) +
                             " steps, need " + std::to_string(n_steps));
        }
        if (bm->dim != sys.noise_dim) {
            throw ParamError("solve: Brownian path dim " + std::to_string(bm->dim) +
                             " does not match noise dim " + std::to_string(sys.noise_dim));
        }
        if (std::fabs(bm->dt - dt) > 1e-12 * std::fmax(1.0, dt)) {
            throw ParamError("solve: Brownian path dt " + std::to_string(bm->dt) +
                             " does not match solver dt " + std::to_string(dt));
        }
    }

    Path path;
    path.times.reserve(static_cast<std::size_t>(n_steps) + 1);
    path.states.reserve(static_cast<std::size_t>(n_steps) + 1);
    path.times.push_back(t0);
    path.states.push_back(x0);

    Tensor x = x0;
    for (int n = 0; n < n_steps; ++n) {
        const double t = t0 + static_cast<double>(n) * dt;
        Tensor u = u_fn ? u_fn(tape, t) : tape.constants({});
        switch (method) {
            case SolveMethod::EulerMaruyama:
                x = em_step(sys, x, u, t, dt, bm->row(n), n);
                break;
            case SolveMethod::Milstein:
                x = milstein_step(sys, x, u, t, dt, bm->row(n), n);
                break;
            case SolveMethod::Rk4:
                x = rk4_step(sys, x, u, t, dt, n);
                break;
        }
        if (!all_finite(x.values())) {
            throw IntegrationError("solve: non-finite state at step " + std::to_string(n) +
                                   " (t=" + std::to_string(t + dt) + ")");
        }
        path.times.push_back(t0 + static_cast<double>(n + 1) * dt);
        path.states.push_back(x);
    }
    return path;
}

Path solve(Tape& tape, const SdeSystem& sys, std::span<const double> x0,
           const InputFn& u_fn, double t0, double t1, double dt,
           SolveMethod method, const BrownianPath* bm) {
    Tensor x0_t = tape.leaf(Shape::vec(static_cast<int>(x0.size())), x0, false);
    return solve(sys, x0_t, u_fn, t0, t1, dt, method, bm);
}

void write_path_csv(const Path& path, std::ostream& os) {
    const int d = path.states.empty() ? 0 : path.states[0].shape().numel();
    os << "t";
    for (int j = 0; j < d; ++j) os << ",x" << j;
    os << "\n";
    char buf[40];
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", path.times[i]);
        os << buf;
        auto v = path.states[i].values();
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", v[static_cast<std::size_t>(j)]);
            os << "," << buf;
        }
        os << "\n";
    }
}

void write_path_csv(const Path& path, const std::string& file) {
    std::ofstream os(file);
    if (!os) throw ParamError("write_path_csv: cannot open '" + file + "'");
    write_path_csv(path, os);
}

} // namespace udekit
