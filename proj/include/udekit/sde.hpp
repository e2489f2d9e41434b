#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "udekit/tensor.hpp"

namespace udekit {

enum class NoiseKind {
    AdditiveDiagonal,
    MultiplicativeDiagonal,
    General,
};

enum class SolveMethod {
    EulerMaruyama,
    Milstein,
    Rk4,
};

SolveMethod solve_method_from_string(const std::string& s);
const char* solve_method_name(SolveMethod m);

// Vector field callbacks run on whatever tape the state lives on, so every
// solver step stays differentiable end to end.
using FieldFn = std::function<Tensor(Tape&, const Tensor& x, const Tensor& u, double t)>;
using InputFn = std::function<Tensor(Tape&, double t)>;

// A forced SDE dx = drift(x,u,t) dt + diffusion(x,u,t) dW.
// Diagonal kinds: diffusion returns a length state_dim vector (noise_dim ==
// state_dim, elementwise nonnegative). General: a state_dim x noise_dim matrix.
struct SdeSystem {
    NoiseKind noise = NoiseKind::AdditiveDiagonal;
    int state_dim = 0;
    int input_dim = 0;
    int noise_dim = 0;
    FieldFn drift;
    FieldFn diffusion;
};

// Pre-sampled Brownian increments, entry ~ Normal(0, dt). Regenerating with
// the same (seed, n_steps, dt, dim) yields identical increments; entry (s, c)
// depends only on the key (seed, s, c).
struct BrownianPath {
    std::uint64_t seed = 0;
    double dt = 0.0;
    int n_steps = 0;
    int dim = 0;
    std::vector<double> increments; // row-major [step][channel]

    std::span<const double> row(int step) const {
        return {increments.data() + static_cast<std::size_t>(step) * static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }
};

BrownianPath sample_brownian(std::uint64_t seed, int n_steps, double dt, int dim);

// Solution grid: times[0] == t0 and states[0] is the initial condition.
struct Path {
    std::vector<double> times;
    std::vector<Tensor> states;

    int n_steps() const { return static_cast<int>(times.size()) - 1; }
    std::vector<double> state(int i) const {
        auto v = states[static_cast<std::size_t>(i)].values();
        return {v.begin(), v.end()};
    }
    std::vector<double> final_state() const { return state(n_steps()); }
};

// One explicit step of each scheme. `step_index` only labels error messages.
Tensor em_step(const SdeSystem& sys, const Tensor& x, const Tensor& u, double t,
               double dt, std::span<const double> dw, int step_index = -1);

// Diagonal noise only; the per-channel derivative of the diffusion is taken
// on a scratch tape and enters the update as a constant coefficient.
Tensor milstein_step(const SdeSystem& sys, const Tensor& x, const Tensor& u, double t,
                     double dt, std::span<const double> dw, int step_index = -1);

// Classical fourth-order Runge-Kutta on the drift alone; the input value is
// held constant across the substages.
Tensor rk4_step(const SdeSystem& sys, const Tensor& x, const Tensor& u, double t,
                double dt, int step_index = -1);

// Iterate the chosen step over a uniform grid. The whole loop is recorded on
// x0's tape. `bm` must cover the grid for the stochastic methods and is
// ignored by Rk4. `u_fn` may be empty when input_dim == 0.
Path solve(const SdeSystem& sys, const Tensor& x0, const InputFn& u_fn,
           double t0, double t1, double dt, SolveMethod method,
           const BrownianPath* bm);

// Convenience overload creating a constant initial-state leaf on `tape`.
Path solve(Tape& tape, const SdeSystem& sys, std::span<const double> x0,
           const InputFn& u_fn, double t0, double t1, double dt,
           SolveMethod method, const BrownianPath* bm);

// Number of uniform steps covering [t0, t1]; rejects spans that are not an
// integral multiple of dt (within rounding).
int step_count(double t0, double t1, double dt);

// CSV export: header `t,x0,x1,...`, one row per grid point, 17 significant
// digits.
void write_path_csv(const Path& path, std::ostream& os);
void write_path_csv(const Path& path, const std::string& file);

} // namespace udekit
