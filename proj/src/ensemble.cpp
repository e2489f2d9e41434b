#include "udekit/ensemble.hpp"

#include "udekit/rng.hpp"

namespace udekit {

std::vector<std::vector<double>> sample_final_states(
    const SdeSystem& sys, std::span<const double> x0, const InputFn& u_fn,
    SolveMethod method, double t0, double t1, double dt,
    std::uint64_t seed, int n_paths, bool parallel) {
    std::vector<std::vector<double>> finals(static_cast<std::size_t>(n_paths));
    const int n_steps = t1 == t0 ? 0 : step_count(t0, t1, dt);
    parallel_for(n_paths, parallel, [&](int k) {
        Tape tape;
        tape.set_grad_enabled(false);
        BrownianPath bm;
        if (method != SolveMethod::Rk4 && n_steps > 0) {
            bm = sample_brownian(derive_seed(seed, "path", static_cast<std::uint64_t>(k)),
                                 n_steps, dt, sys.noise_dim);
        }
        Path path = solve(tape, sys, x0, u_fn, t0, t1, dt, method, &bm);
        finals[static_cast<std::size_t>(k)] = path.final_state();
    });
    return finals;
}

std::vector<double> ensemble_reduce(
    const SdeSystem& sys, std::span<const double> x0, const InputFn& u_fn,
    SolveMethod method, double t0, double t1, double dt,
    std::uint64_t seed, int n_paths, const PathReduce& reduce, bool parallel) {
    std::vector<double> out(static_cast<std::size_t>(n_paths));
    const int n_steps = t1 == t0 ? 0 : step_count(t0, t1, dt);
    parallel_for(n_paths, parallel, [&](int k) {
        Tape tape;
        tape.set_grad_enabled(false);
        BrownianPath bm;
        if (method != SolveMethod::Rk4 && n_steps > 0) {
            bm = sample_brownian(derive_seed(seed, "path", static_cast<std::uint64_t>(k)),
                                 n_steps, dt, sys.noise_dim);
        }
        Path path = solve(tape, sys, x0, u_fn, t0, t1, dt, method, &bm);
        out[static_cast<std::size_t>(k)] = reduce(k, path, bm);
    });
    return out;
}

} // namespace udekit
