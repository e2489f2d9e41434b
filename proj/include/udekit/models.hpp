#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "udekit/rng.hpp"
#include "udekit/tensor.hpp"

namespace udekit {

enum class OutputAct { Identity, Softplus };

// Feed-forward network with tanh hidden units. widths = {in, hidden..., out};
// a two-entry widths list is a plain affine map.
struct Mlp {
    std::vector<int> widths;
    OutputAct out_act = OutputAct::Identity;
    std::vector<Param> weights;
    std::vector<Param> biases;

    Mlp() = default;
    Mlp(const std::string& name, std::vector<int> widths, OutputAct act = OutputAct::Identity);

    int in_dim() const { return widths.front(); }
    int out_dim() const { return widths.back(); }

    // Glorot-uniform weights, zero biases.
    void init(Rng& rng);
    // Zero the final layer so the network starts as the zero function.
    void zero_last_layer();

    Tensor forward(Tape& tape, const Tensor& in) const;
    void collect(std::vector<Param*>& out);
};

// ---- drift families --------------------------------------------------------
// Positive mechanistic parameters (a, tau) are stored through a softplus
// reparameterization so the optimizer stays unconstrained.

// dx = a (m - x); a and m are scalars shared across channels.
struct OuDrift {
    int dim = 1;
    Param a_raw{"a_raw", Shape::scalar()};
    Param m{"m", Shape::scalar()};

    explicit OuDrift(int dim = 1, double a = 1.0, double m_value = 0.0);
    double a() const { return stable_softplus(a_raw.value[0]); }
    double m_value() const { return m.value[0]; }
    void set_a(double v) { a_raw.value[0] = softplus_inverse(v); }
};

// dx = (1/tau) (-x + J tanh(x) + B u).
struct WilsonCowanDrift {
    int dim = 1;
    int input_dim = 0;
    Param tau_raw{"tau_raw", Shape::scalar()};
    Param J;
    Param B;

    WilsonCowanDrift() = default;
    WilsonCowanDrift(int dim, int input_dim, double tau = 1.0);
    double tau() const { return stable_softplus(tau_raw.value[0]); }
    void set_tau(double v) { tau_raw.value[0] = softplus_inverse(v); }
};

// dx_i = omega_i + (1/N) sum_j K_ij sin(x_j - x_i). The coupling strength is
// a full matrix; a constant matrix recovers the scalar-coupling form.
struct KuramotoDrift {
    int dim = 1;
    Param omega;
    Param K;

    KuramotoDrift() = default;
    explicit KuramotoDrift(int dim);
};

// Kuramoto plus a corrective network x -> R^N, initialized to zero output so
// training starts at the mechanistic model.
struct KuramotoResidualDrift {
    KuramotoDrift base;
    Mlp residual;

    KuramotoResidualDrift() = default;
    KuramotoResidualDrift(int dim, const std::vector<int>& hidden);
};

// dx_i = f(x, u)_i + sum_j A_ij g(x_j, x_i); A is fixed data, never on the
// tape.
struct GraphCoupledDrift {
    int dim = 1;
    int input_dim = 0;
    std::vector<double> adjacency; // row-major dim x dim
    Mlp local;                     // (dim + input_dim) -> dim
    Mlp pair;                      // (x_j, x_i) -> scalar

    GraphCoupledDrift() = default;
    GraphCoupledDrift(int dim, int input_dim, std::vector<double> adjacency,
                      const std::vector<int>& local_hidden, const std::vector<int>& pair_hidden);
};

// dx = net(x, u).
struct NeuralDrift {
    int dim = 1;
    int input_dim = 0;
    Mlp net;

    NeuralDrift() = default;
    NeuralDrift(int dim, int input_dim, const std::vector<int>& hidden);
};

using DriftSpec = std::variant<OuDrift, WilsonCowanDrift, KuramotoDrift,
                               KuramotoResidualDrift, GraphCoupledDrift, NeuralDrift>;

Tensor eval_drift(Tape& tape, const DriftSpec& spec, const Tensor& x, const Tensor& u, double t);
int drift_dim(const DriftSpec& spec);
// Input width the variant consumes; nullopt when the variant ignores u.
std::optional<int> drift_input_dim(const DriftSpec& spec);
void collect_drift_params(DriftSpec& spec, std::vector<Param*>& out);
const char* drift_variant_name(const DriftSpec& spec);

// Glorot-initialize network parts from the seed; mechanistic parameters keep
// their constructed values.
void init_drift_params(DriftSpec& spec, std::uint64_t seed);

// ---- diffusion families ----------------------------------------------------

// State-independent diagonal, b = softplus(b_raw) per channel.
struct ConstantDiagonal {
    int dim = 1;
    Param b_raw;

    ConstantDiagonal() = default;
    explicit ConstantDiagonal(int dim, double b = 0.1);
    std::vector<double> b() const;
    // Values at or below 1e-12 map to a raw of -40 (softplus ~ 4e-18).
    void set_b(std::span<const double> values);
};

// Diagonal sigma(x, u) through a softplus-output network.
struct StateDependentDiagonal {
    int dim = 1;
    int input_dim = 0;
    Mlp net;

    StateDependentDiagonal() = default;
    StateDependentDiagonal(int dim, int input_dim, const std::vector<int>& hidden);
};

using DiffusionSpec = std::variant<ConstantDiagonal, StateDependentDiagonal>;

Tensor eval_diffusion(Tape& tape, const DiffusionSpec& spec, const Tensor& x, const Tensor& u,
                      double t);
int diffusion_dim(const DiffusionSpec& spec);
void collect_diffusion_params(DiffusionSpec& spec, std::vector<Param*>& out);
const char* diffusion_variant_name(const DiffusionSpec& spec);
void init_diffusion_params(DiffusionSpec& spec, std::uint64_t seed);

} // namespace udekit
