#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "udekit/sde.hpp"

namespace udekit {

// Deterministic parallel loop over independent iterations. Bodies must write
// only to disjoint slots. With parallel == false this is a plain serial loop,
// kept as the reference the OpenMP path is tested against; both orders of
// execution produce bit-identical results because nothing is shared. If
// bodies throw, the exception from the lowest iteration index is rethrown.
template <typename F>
void parallel_for(int n, bool parallel, F&& body) {
    if (!parallel || n <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<bool> failed{false};
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
    for (int i = 0; i < n; ++i) {
        try {
            body(i);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
            failed.store(true, std::memory_order_relaxed);
        }
    }
    if (failed.load()) {
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
}

// Monte Carlo ensembles of independent SDE solutions. Path k draws its
// Brownian increments from derive_seed(seed, "path", k), so the result is a
// pure function of the arguments regardless of thread count or schedule.

// Final state of each of n_paths solutions started from the same x0.
std::vector<std::vector<double>> sample_final_states(
    const SdeSystem& sys, std::span<const double> x0, const InputFn& u_fn,
    SolveMethod method, double t0, double t1, double dt,
    std::uint64_t seed, int n_paths, bool parallel = true);

// Per-path scalar reduction over the solved path and the Brownian increments
// that drove it (for error-vs-exact-solution studies).
using PathReduce = std::function<double(int path_index, const Path& path, const BrownianPath& bm)>;

std::vector<double> ensemble_reduce(
    const SdeSystem& sys, std::span<const double> x0, const InputFn& u_fn,
    SolveMethod method, double t0, double t1, double dt,
    std::uint64_t seed, int n_paths, const PathReduce& reduce, bool parallel = true);

} // namespace udekit
