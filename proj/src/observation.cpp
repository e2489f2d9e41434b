#include "udekit/observation.hpp"

#include <cmath>

namespace udekit {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
} // namespace

ObservationModel ObservationModel::gaussian_identity(int dim, double s) {
    ObservationModel m;
    m.kind = Kind::Gaussian;
    m.readout_kind = ReadoutKind::Identity;
    m.latent_dim = dim;
    m.obs_dim = dim;
    m.s_raw = Param("obs.s_raw", Shape::vec(dim));
    m.set_noise_scale(s);
    return m;
}

ObservationModel ObservationModel::gaussian_affine(int d_x, int d_y, double s) {
    ObservationModel m;
    m.kind = Kind::Gaussian;
    m.readout_kind = ReadoutKind::Affine;
    m.latent_dim = d_x;
    m.obs_dim = d_y;
    m.readout = Mlp("obs.readout", {d_x, d_y});
    m.s_raw = Param("obs.s_raw", Shape::vec(d_y));
    m.set_noise_scale(s);
    return m;
}

ObservationModel ObservationModel::gaussian_mlp(int d_x, int d_y, const std::vector<int>& hidden,
                                                double s) {
    ObservationModel m;
    m.kind = Kind::Gaussian;
    m.readout_kind = ReadoutKind::MlpReadout;
    m.latent_dim = d_x;
    m.obs_dim = d_y;
    std::vector<int> widths{d_x};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(d_y);
    m.readout = Mlp("obs.readout", widths);
    m.s_raw = Param("obs.s_raw", Shape::vec(d_y));
    m.set_noise_scale(s);
    return m;
}

ObservationModel ObservationModel::poisson(int d_x, int d_y, double bin_width) {
    if (!(bin_width > 0.0)) throw ParamError("ObservationModel: bin width must be positive");
    ObservationModel m;
    m.kind = Kind::Poisson;
    m.readout_kind = ReadoutKind::Affine;
    m.latent_dim = d_x;
    m.obs_dim = d_y;
    m.readout = Mlp("obs.readout", {d_x, d_y});
    m.bin_width = bin_width;
    return m;
}

std::vector<double> ObservationModel::noise_scale() const {
    std::vector<double> out(s_raw.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(s_raw.value[i]);
    return out;
}

void ObservationModel::set_noise_scale(double s) {
    for (double& v : s_raw.value) v = softplus_inverse(s);
}

Tensor ObservationModel::mean_or_rate(Tape& tape, const Tensor& x) const {
    if (x.shape().numel() != latent_dim) {
        throw ParamError("observation: latent state shape " + x.shape().str() +
                         " does not match dim " + std::to_string(latent_dim));
    }
    Tensor r = readout_kind == ReadoutKind::Identity ? x : readout.forward(tape, x);
    return kind == Kind::Poisson ? softplus(r) : r;
}

std::vector<double> ObservationModel::mean_or_rate_values(std::span<const double> x) const {
    Tape tape;
    tape.set_grad_enabled(false);
    Tensor xt = tape.leaf(Shape::vec(static_cast<int>(x.size())), x, false);
    auto v = mean_or_rate(tape, xt).values();
    return {v.begin(), v.end()};
}

Tensor ObservationModel::log_likelihood(Tape& tape, std::span<const double> y,
                                        const Tensor& x) const {
    if (static_cast<int>(y.size()) != obs_dim) {
        throw ParamError("log_likelihood: " + std::to_string(y.size()) +
                         " observation channels, expected " + std::to_string(obs_dim));
    }
    if (kind == Kind::Gaussian) {
        Tensor m = mean_or_rate(tape, x);
        Tensor resid = sub(tape.constants(y), m);
        Tensor log_s = log(softplus(tape.stage(s_raw)));
        Tensor quad = mul(square(resid), exp(scale(log_s, -2.0)));
        Tensor c0 = tape.constant(-0.5 * static_cast<double>(obs_dim) * kLog2Pi);
        return sub(sub(c0, sum(log_s)), scale(sum(quad), 0.5));
    }
    // Poisson: counts must be nonnegative integers.
    double log_fact = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double v = y[j];
        if (!(v >= 0.0) || std::floor(v) != v) {
            throw DataError("log_likelihood: Poisson channel " + std::to_string(j) +
                            " holds " + std::to_string(v) + ", expected a nonnegative integer");
        }
        log_fact += std::lgamma(v + 1.0);
    }
    Tensor lam_dt = scale(mean_or_rate(tape, x), bin_width);
    Tensor ll = sub(sum(mul(tape.constants(y), log(lam_dt))), sum(lam_dt));
    return sub(ll, tape.constant(log_fact));
}

double ObservationModel::log_likelihood_value(std::span<const double> y,
                                              std::span<const double> x) const {
    Tape tape;
    tape.set_grad_enabled(false);
    Tensor xt = tape.leaf(Shape::vec(static_cast<int>(x.size())), x, false);
    return log_likelihood(tape, y, xt).scalar_value();
}

std::vector<double> ObservationModel::sample(std::span<const double> x, Rng& rng) const {
    std::vector<double> r = mean_or_rate_values(x);
    if (kind == Kind::Gaussian) {
        const std::vector<double> s = noise_scale();
        for (std::size_t j = 0; j < r.size(); ++j) r[j] += s[j] * rng.normal();
        return r;
    }
    for (double& v : r) v = static_cast<double>(rng.poisson(v * bin_width));
    return r;
}

void ObservationModel::collect(std::vector<Param*>& out) {
    if (readout_kind != ReadoutKind::Identity) readout.collect(out);
    if (kind == Kind::Gaussian) out.push_back(&s_raw);
}

void ObservationModel::init(std::uint64_t seed) {
    if (readout_kind == ReadoutKind::MlpReadout) {
        Rng rng(derive_seed(seed, "observation-init"));
        readout.init(rng);
    } else if (readout_kind == ReadoutKind::Affine) {
        // identity-like start: unit diagonal where dims allow
        for (double& w : readout.weights[0].value) w = 0.0;
        for (int i = 0; i < std::min(obs_dim, latent_dim); ++i) {
            readout.weights[0].value[static_cast<std::size_t>(i * latent_dim + i)] = 1.0;
        }
        for (double& b : readout.biases[0].value) b = 0.0;
    }
}

} // namespace udekit
