#pragma once

// Shared Monte Carlo study helpers used by both the unit suites and the
// acceptance runner.

#include <cmath>
#include <vector>

#include "udekit/ensemble.hpp"
#include "udekit/rng.hpp"

namespace udekit::testing {

inline SdeSystem make_ou_system(double a, double m, double b) {
    SdeSystem sys;
    sys.noise = NoiseKind::AdditiveDiagonal;
    sys.state_dim = 1;
    sys.input_dim = 0;
    sys.noise_dim = 1;
    sys.drift = [a, m](Tape& tape, const Tensor& x, const Tensor&, double) {
        return mul(tape.constant(a), sub(tape.constant(m), x));
    };
    sys.diffusion = [b](Tape& tape, const Tensor&, const Tensor&, double) {
        return tape.constant(b);
    };
    return sys;
}

// dx = x dW: multiplicative diagonal noise with exact solution
// x0 * exp(-t/2 + W(t)).
inline SdeSystem make_gbm_system() {
    SdeSystem sys;
    sys.noise = NoiseKind::MultiplicativeDiagonal;
    sys.state_dim = 1;
    sys.input_dim = 0;
    sys.noise_dim = 1;
    sys.drift = [](Tape& tape, const Tensor&, const Tensor&, double) {
        return tape.constant(0.0);
    };
    sys.diffusion = [](Tape&, const Tensor& x, const Tensor&, double) { return x; };
    return sys;
}

struct MomentStats {
    double mean = 0.0;
    double var = 0.0;
};

inline MomentStats ou_em_moments(double a, double m, double b, double x0, double t_end,
                                 double dt, int n_paths, std::uint64_t seed) {
    SdeSystem sys = make_ou_system(a, m, b);
    const std::vector<double> x0v{x0};
    auto finals = sample_final_states(sys, x0v, nullptr, SolveMethod::EulerMaruyama, 0.0, t_end,
                                      dt, seed, n_paths);
    MomentStats s;
    for (const auto& f : finals) s.mean += f[0];
    s.mean /= static_cast<double>(n_paths);
    for (const auto& f : finals) s.var += (f[0] - s.mean) * (f[0] - s.mean);
    s.var /= static_cast<double>(n_paths - 1);
    return s;
}

// Mean absolute terminal error of a scheme on dx = x dW against the exact
// solution driven by the same Brownian path.
inline double gbm_strong_error(SolveMethod method, double dt, int n_paths, std::uint64_t seed) {
    SdeSystem sys = make_gbm_system();
    const std::vector<double> x0{1.0};
    auto errs = ensemble_reduce(
        sys, x0, nullptr, method, 0.0, 1.0, dt, seed, n_paths,
        [](int, const Path& path, const BrownianPath& bm) {
            double w_t = 0.0;
            for (int s = 0; s < bm.n_steps; ++s) w_t += bm.row(s)[0];
            const double exact = std::exp(-0.5 * 1.0 + w_t);
            return std::fabs(path.final_state()[0] - exact);
        });
    double mean = 0.0;
    for (double e : errs) mean += e;
    return mean / static_cast<double>(n_paths);
}

inline double fit_loglog_slope(const std::vector<double>& dts, const std::vector<double>& errs) {
    const std::size_t n = dts.size();
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::log2(dts[i]);
        const double y = std::log2(errs[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

inline double strong_order_slope(SolveMethod method, int n_paths, std::uint64_t seed) {
    std::vector<double> dts, errs;
    for (int k = 6; k <= 10; ++k) {
        const double dt = std::pow(2.0, -k);
        dts.push_back(dt);
        errs.push_back(gbm_strong_error(method, dt, n_paths, seed));
    }
    return fit_loglog_slope(dts, errs);
}

} // namespace udekit::testing
