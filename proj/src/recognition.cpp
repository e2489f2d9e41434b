#include "udekit/recognition.hpp"

#include <cmath>

namespace udekit {

WindowDist WindowDist::fixed(int c) {
    if (c < 1) throw ConfigError("window length must be >= 1, got " + std::to_string(c));
    return WindowDist{c, c};
}

WindowDist WindowDist::uniform(int lo, int hi) {
    if (lo < 1 || hi < lo) {
        throw ConfigError("window bounds [" + std::to_string(lo) + ", " + std::to_string(hi) +
                          "] invalid; need 1 <= lo <= hi");
    }
    return WindowDist{lo, hi};
}

int sample_window_length(const WindowDist& dist, Rng& rng) {
    if (dist.c_min < 1 || dist.c_max < dist.c_min) {
        throw ConfigError("window bounds [" + std::to_string(dist.c_min) + ", " +
                          std::to_string(dist.c_max) + "] invalid");
    }
    if (dist.c_min == dist.c_max) return dist.c_min;
    return rng.uniform_int(dist.c_min, dist.c_max);
}

RecognitionModel::RecognitionModel(int d_y, int d_u, int h, int d_x, bool prob)
    : obs_dim(d_y), input_dim(d_u), hidden(h), latent_dim(d_x), probabilistic(prob) {
    if (d_y < 1) throw ParamError("RecognitionModel: obs dim must be >= 1");
    if (h < 1) throw ParamError("RecognitionModel: hidden width must be >= 1");
    const int in = d_y + d_u;
    const int out = prob ? 2 * d_x : d_x;
    Wz = Param("rec.Wz", Shape::mat(h, in + h));
    bz = Param("rec.bz", Shape::vec(h));
    Wh = Param("rec.Wh", Shape::mat(h, in + h));
    bh = Param("rec.bh", Shape::vec(h));
    Wo = Param("rec.Wo", Shape::mat(out, h));
    bo = Param("rec.bo", Shape::vec(out));
}

void RecognitionModel::init(std::uint64_t seed) {
    Rng rng(derive_seed(seed, "recognition-init"));
    auto glorot = [&](Param& p) {
        const double bound = std::sqrt(6.0 / static_cast<double>(p.shape.d0 + p.shape.d1));
        for (double& w : p.value) w = rng.uniform(-bound, bound);
    };
    glorot(Wz);
    glorot(Wh);
    glorot(Wo);
}

void RecognitionModel::collect(std::vector<Param*>& out) {
    out.push_back(&Wz);
    out.push_back(&bz);
    out.push_back(&Wh);
    out.push_back(&bh);
    out.push_back(&Wo);
    out.push_back(&bo);
}

Tensor RecognitionModel::final_hidden(Tape& tape, std::span<const Tensor> y_rows,
                                      std::span<const Tensor> u_rows) const {
    const std::size_t c = y_rows.size();
    if (c < 1) throw ParamError("infer_x0: conditioning window must hold at least one sample");
    if (input_dim > 0 && u_rows.size() != c) {
        throw ParamError("infer_x0: window length mismatch, " + std::to_string(c) +
                         " observation rows vs " + std::to_string(u_rows.size()) + " input rows");
    }
    Tensor h = tape.zeros(Shape::vec(hidden));
    for (std::size_t n = 0; n < c; ++n) {
        Tensor in = y_rows[n];
        if (in.shape().numel() != obs_dim) {
            throw ParamError("infer_x0: observation row has shape " + in.shape().str() +
                             ", expected " + std::to_string(obs_dim) + " channels");
        }
        if (input_dim > 0) {
            if (u_rows[n].shape().numel() != input_dim) {
                throw ParamError("infer_x0: input row has shape " + u_rows[n].shape().str() +
                                 ", expected " + std::to_string(input_dim) + " channels");
            }
            in = concat(in, u_rows[n]);
        }
        Tensor joint = concat(in, h);
        Tensor z = sigmoid(add(matmul(tape.stage(Wz), joint), tape.stage(bz)));
        Tensor cand = tanh(add(matmul(tape.stage(Wh), joint), tape.stage(bh)));
        Tensor one = tape.constant(1.0);
        h = add(mul(sub(one, z), h), mul(z, cand));
    }
    return h;
}

Tensor RecognitionModel::infer_x0(Tape& tape, std::span<const Tensor> y_rows,
                                  std::span<const Tensor> u_rows) const {
    Tensor h = final_hidden(tape, y_rows, u_rows);
    Tensor out = add(matmul(tape.stage(Wo), h), tape.stage(bo));
    return probabilistic ? slice(out, 0, latent_dim) : out;
}

RecognitionModel::GaussianX0 RecognitionModel::infer_x0_gaussian(
    Tape& tape, std::span<const Tensor> y_rows, std::span<const Tensor> u_rows) const {
    if (!probabilistic) {
        throw ParamError("infer_x0_gaussian: model was built in point-estimate mode");
    }
    Tensor h = final_hidden(tape, y_rows, u_rows);
    Tensor out = add(matmul(tape.stage(Wo), h), tape.stage(bo));
    return {slice(out, 0, latent_dim), slice(out, latent_dim, latent_dim)};
}

Tensor RecognitionModel::infer_x0_values(
    Tape& tape, const std::vector<std::vector<double>>& y_rows,
    const std::vector<std::vector<double>>& u_rows) const {
    std::vector<Tensor> y, u;
    y.reserve(y_rows.size());
    for (const auto& r : y_rows) y.push_back(tape.constants(r));
    u.reserve(u_rows.size());
    for (const auto& r : u_rows) u.push_back(tape.constants(r));
    return infer_x0(tape, y, u);
}

} // namespace udekit
