#pragma once

#include <vector>

#include "udekit/tensor.hpp"

namespace udekit {

enum class Interp { Linear, ZeroOrderHold };

// Maps discrete stimulus samples v_n to a continuous-time input u(t): a
// per-sample encoding (identity or learnable affine), an optional appended
// time channel and an interpolation scheme between samples.
struct StimulusEncoder {
    enum class Encoding { Identity, Affine };

    Encoding encoding = Encoding::Identity;
    Interp interpolation = Interp::Linear;
    bool time_channel = false;
    int stim_dim = 0; // d_v
    int out_dim = 0;  // d_u, time channel included
    Param W;
    Param c;

    static StimulusEncoder identity(int stim_dim, Interp interp = Interp::Linear,
                                    bool time_channel = false);
    static StimulusEncoder affine(int stim_dim, int encoded_dim, Interp interp = Interp::Linear,
                                  bool time_channel = false);

    // Width of the learned/identity encoding before the time channel.
    int encoded_dim() const { return out_dim - (time_channel ? 1 : 0); }

    // One encoded row per sample; rows are recorded on the tape so a learnable
    // encoding stays differentiable.
    std::vector<Tensor> encode(Tape& tape, const std::vector<std::vector<double>>& v_samples,
                               const std::vector<double>& times) const;

    void collect(std::vector<Param*>& out);
    void init(std::uint64_t seed);
};

// Value of the continuous input at query time t. Queries outside the sample
// range raise an extrapolation error; there is no silent clamping.
Tensor interpolate(const StimulusEncoder& enc, const std::vector<Tensor>& encoded,
                   const std::vector<double>& times, double t);

// Same lookup for arbitrary sample rows with an explicit scheme.
Tensor interpolate_rows(const std::vector<Tensor>& rows, const std::vector<double>& times,
                        double t, Interp scheme);

} // namespace udekit
