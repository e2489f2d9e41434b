#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "udekit/models.hpp"
#include "udekit/rng.hpp"
#include "udekit/tensor.hpp"

namespace udekit {

// Probabilistic map from latent states to measurements. Gaussian channels
// carry a learnable softplus-reparameterized noise scale; Poisson channels
// rate softplus(readout(x)) scaled by the dataset's bin width.
struct ObservationModel {
    enum class Kind { Gaussian, Poisson };
    enum class ReadoutKind { Identity, Affine, MlpReadout };

    Kind kind = Kind::Gaussian;
    ReadoutKind readout_kind = ReadoutKind::Identity;
    int latent_dim = 1;
    int obs_dim = 1;
    Mlp readout;            // affine = two-width Mlp; unused for identity
    Param s_raw;            // gaussian noise scale, per channel
    double bin_width = 1.0; // poisson

    static ObservationModel gaussian_identity(int dim, double s = 0.1);
    static ObservationModel gaussian_affine(int latent_dim, int obs_dim, double s = 0.1);
    static ObservationModel gaussian_mlp(int latent_dim, int obs_dim,
                                         const std::vector<int>& hidden, double s = 0.1);
    static ObservationModel poisson(int latent_dim, int obs_dim, double bin_width);

    std::vector<double> noise_scale() const; // effective s per channel
    void set_noise_scale(double s);

    // Gaussian mean / Poisson rate (before bin-width scaling).
    Tensor mean_or_rate(Tape& tape, const Tensor& x) const;
    std::vector<double> mean_or_rate_values(std::span<const double> x) const;

    Tensor log_likelihood(Tape& tape, std::span<const double> y, const Tensor& x) const;
    double log_likelihood_value(std::span<const double> y, std::span<const double> x) const;

    std::vector<double> sample(std::span<const double> x, Rng& rng) const;

    void collect(std::vector<Param*>& out);
    void init(std::uint64_t seed);
};

} // namespace udekit
