#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "udekit/rng.hpp"
#include "udekit/tensor.hpp"

namespace udekit {

// Conditioning-window length distribution: fixed (c_min == c_max) or uniform
// over [c_min, c_max].
struct WindowDist {
    int c_min = 1;
    int c_max = 1;

    static WindowDist fixed(int c);
    static WindowDist uniform(int lo, int hi);
};

int sample_window_length(const WindowDist& dist, Rng& rng);

// Backward-running gated recurrent estimator of the initial latent state.
// Consumes (y, u) rows in time-reversed order (latest sample first); the
// readout of the final hidden state is the point estimate, or mean and
// log-variance when probabilistic mode is on.
struct RecognitionModel {
    int obs_dim = 0;
    int input_dim = 0;
    int hidden = 32;
    int latent_dim = 1;
    bool probabilistic = false;

    Param Wz, bz; // update gate
    Param Wh, bh; // candidate state
    Param Wo, bo; // readout

    RecognitionModel() = default;
    RecognitionModel(int obs_dim, int input_dim, int hidden, int latent_dim,
                     bool probabilistic = false);

    int in_dim() const { return obs_dim + input_dim; }

    Tensor infer_x0(Tape& tape, std::span<const Tensor> y_rows_reversed,
                    std::span<const Tensor> u_rows_reversed) const;

    struct GaussianX0 {
        Tensor mean;
        Tensor log_var;
    };
    GaussianX0 infer_x0_gaussian(Tape& tape, std::span<const Tensor> y_rows_reversed,
                                 std::span<const Tensor> u_rows_reversed) const;

    // Convenience entry point from plain sample rows (already reversed).
    Tensor infer_x0_values(Tape& tape, const std::vector<std::vector<double>>& y_rows_reversed,
                           const std::vector<std::vector<double>>& u_rows_reversed) const;

    void collect(std::vector<Param*>& out);
    void init(std::uint64_t seed);

  private:
    Tensor final_hidden(Tape& tape, std::span<const Tensor> y_rows,
                        std::span<const Tensor> u_rows) const;
};

} // namespace udekit
