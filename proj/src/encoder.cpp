#include "udekit/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "udekit/rng.hpp"

namespace udekit {

StimulusEncoder StimulusEncoder::identity(int stim_dim, Interp interp, bool time_channel) {
    if (stim_dim < 0) throw ParamError("StimulusEncoder: negative stimulus dim");
    StimulusEncoder e;
    e.encoding = Encoding::Identity;
    e.interpolation = interp;
    e.time_channel = time_channel;
    e.stim_dim = stim_dim;
    e.out_dim = stim_dim + (time_channel ? 1 : 0);
    return e;
}

StimulusEncoder StimulusEncoder::affine(int stim_dim, int encoded_dim, Interp interp,
                                        bool time_channel) {
    if (stim_dim < 1) throw ParamError("StimulusEncoder: affine encoding needs stimulus dim >= 1");
    if (encoded_dim < 1) throw ParamError("StimulusEncoder: affine encoding needs output dim >= 1");
    StimulusEncoder e;
    e.encoding = Encoding::Affine;
    e.interpolation = interp;
    e.time_channel = time_channel;
    e.stim_dim = stim_dim;
    e.out_dim = encoded_dim + (time_channel ? 1 : 0);
    e.W = Param("enc.W", Shape::mat(encoded_dim, stim_dim));
    e.c = Param("enc.c", Shape::vec(encoded_dim));
    return e;
}

std::vector<Tensor> StimulusEncoder::encode(Tape& tape,
                                            const std::vector<std::vector<double>>& v_samples,
                                            const std::vector<double>& times) const {
    if (v_samples.size() != times.size()) {
        throw ParamError("encode: " + std::to_string(v_samples.size()) + " samples vs " +
                         std::to_string(times.size()) + " time stamps");
    }
    for (std::size_t i = 0; i + 1 < times.size(); ++i) {
        if (!(times[i] < times[i + 1])) throw ParamError("encode: times must be strictly increasing");
    }
    std::vector<Tensor> rows;
    rows.reserve(v_samples.size());
    for (std::size_t n = 0; n < v_samples.size(); ++n) {
        const auto& v = v_samples[n];
        if (static_cast<int>(v.size()) != stim_dim) {
            throw ParamError("encode: sample " + std::to_string(n) + " has " +
                             std::to_string(v.size()) + " channels, expected " +
                             std::to_string(stim_dim));
        }
        Tensor row{nullptr, -1};
        if (encoding == Encoding::Identity) {
            row = tape.constants(v);
        } else {
            row = add(matmul(tape.stage(W), tape.constants(v)), tape.stage(c));
        }
        if (time_channel) {
            const double t = times[n];
            row = row.shape().numel() == 0 ? tape.constants({&t, 1})
                                           : concat(row, tape.constants({&t, 1}));
        }
        rows.push_back(row);
    }
    return rows;
}

void StimulusEncoder::collect(std::vector<Param*>& out) {
    if (encoding == Encoding::Affine) {
        out.push_back(&W);
        out.push_back(&c);
    }
}

void StimulusEncoder::init(std::uint64_t seed) {
    if (encoding != Encoding::Affine) return;
    Rng rng(derive_seed(seed, "encoder-init"));
    const double bound = std::sqrt(6.0 / static_cast<double>(stim_dim + encoded_dim()));
    for (double& w : W.value) w = rng.uniform(-bound, bound);
    for (double& b : c.value) b = 0.0;
}

Tensor interpolate_rows(const std::vector<Tensor>& rows, const std::vector<double>& times,
                        double t, Interp scheme) {
    if (rows.size() != times.size() || times.empty()) {
        throw ParamError("interpolate: sample rows and times disagree");
    }
    const double lo = times.front();
    const double hi = times.back();
    const double eps = 1e-9 * std::fmax(1.0, std::fmax(std::fabs(lo), std::fabs(hi)));
    if (t < lo - eps || t > hi + eps) {
        throw ParamError("interpolate: query t=" + std::to_string(t) +
                         " would extrapolate outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
    }
    // queries within rounding of the boundary resolve to the boundary sample
    if (t <= lo) return rows.front();
    if (t >= hi) return rows.back();

    const auto it = std::upper_bound(times.begin(), times.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    if (times[k] == t) return rows[k];
    if (scheme == Interp::ZeroOrderHold) return rows[k];
    const double w = (t - times[k]) / (times[k + 1] - times[k]);
    return add(scale(rows[k], 1.0 - w), scale(rows[k + 1], w));
}

Tensor interpolate(const StimulusEncoder& enc, const std::vector<Tensor>& encoded,
                   const std::vector<double>& times, double t) {
    return interpolate_rows(encoded, times, t, enc.interpolation);
}

} // namespace udekit
