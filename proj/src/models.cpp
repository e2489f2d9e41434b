#include "udekit/models.hpp"

#include <cmath>

namespace udekit {

// ---- Mlp -------------------------------------------------------------------

Mlp::Mlp(const std::string& name, std::vector<int> w, OutputAct act)
    : widths(std::move(w)), out_act(act) {
    if (widths.size() < 2) throw ParamError("Mlp: need at least input and output widths");
    for (int d : widths) {
        if (d < 0) throw ParamError("Mlp: negative layer width");
    }
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        weights.emplace_back(name + ".W" + std::to_string(l),
                             Shape::mat(widths[l + 1], widths[l]));
        biases.emplace_back(name + ".b" + std::to_string(l), Shape::vec(widths[l + 1]));
    }
}

void Mlp::init(Rng& rng) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const double bound = std::sqrt(6.0 / static_cast<double>(widths[l] + widths[l + 1]));
        for (double& w : weights[l].value) w = rng.uniform(-bound, bound);
        for (double& b : biases[l].value) b = 0.0;
    }
}

void Mlp::zero_last_layer() {
    for (double& w : weights.back().value) w = 0.0;
    for (double& b : biases.back().value) b = 0.0;
}

Tensor Mlp::forward(Tape& tape, const Tensor& in) const {
    if (in.shape().numel() != in_dim()) {
        throw ShapeError("Mlp: input shape " + in.shape().str() + " does not match width " +
                         std::to_string(in_dim()));
    }
    Tensor h = in;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = add(matmul(tape.stage(weights[l]), h), tape.stage(biases[l]));
        if (l + 1 < weights.size()) h = tanh(h);
    }
    if (out_act == OutputAct::Softplus) h = softplus(h);
    return h;
}

void Mlp::collect(std::vector<Param*>& out) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
}

// ---- drift variants ----------------------------------------------------------

OuDrift::OuDrift(int d, double a, double m_val) : dim(d) {
    set_a(a);
    m.value[0] = m_val;
}

WilsonCowanDrift::WilsonCowanDrift(int d, int d_u, double tau)
    : dim(d), input_dim(d_u), J("J", Shape::mat(d, d)), B("B", Shape::mat(d, d_u)) {
    set_tau(tau);
}

KuramotoDrift::KuramotoDrift(int d)
    : dim(d), omega("omega", Shape::vec(d)), K("K", Shape::mat(d, d)) {}

KuramotoResidualDrift::KuramotoResidualDrift(int d, const std::vector<int>& hidden)
    : base(d) {
    std::vector<int> widths{d};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(d);
    residual = Mlp("residual", widths);
}

GraphCoupledDrift::GraphCoupledDrift(int d, int d_u, std::vector<double> adj,
                                     const std::vector<int>& local_hidden,
                                     const std::vector<int>& pair_hidden)
    : dim(d), input_dim(d_u), adjacency(std::move(adj)) {
    if (static_cast<int>(adjacency.size()) != d * d) {
        throw ParamError("GraphCoupledDrift: adjacency must be " + std::to_string(d) + "x" +
                         std::to_string(d));
    }
    std::vector<int> lw{d + d_u};
    lw.insert(lw.end(), local_hidden.begin(), local_hidden.end());
    lw.push_back(d);
    local = Mlp("local", lw);
    std::vector<int> pw{2};
    pw.insert(pw.end(), pair_hidden.begin(), pair_hidden.end());
    pw.push_back(1);
    pair = Mlp("pair", pw);
}

NeuralDrift::NeuralDrift(int d, int d_u, const std::vector<int>& hidden)
    : dim(d), input_dim(d_u) {
    std::vector<int> widths{d + d_u};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(d);
    net = Mlp("net", widths);
}

namespace {

void check_state(const Tensor& x, int dim, const char* variant) {
    if (x.shape().numel() != dim) {
        throw ParamError(std::string(variant) + ": state shape " + x.shape().str() +
                         " does not match dim " + std::to_string(dim));
    }
}

void check_input(const Tensor& u, int dim, const char* variant) {
    if (u.shape().numel() != dim) {
        throw ParamError(std::string(variant) + ": input shape " + u.shape().str() +
                         " does not match input dim " + std::to_string(dim));
    }
}

Tensor with_input(Tape& tape, const Tensor& x, const Tensor& u) {
    if (u.shape().numel() == 0) return x;
    (void)tape;
    return concat(x, u);
}

Tensor kuramoto_field(Tape& tape, const KuramotoDrift& k, const Tensor& x) {
    check_state(x, k.dim, "kuramoto");
    // sum_j K_ij sin(x_j - x_i) expanded through the angle difference
    // identity: cos(x_i) (K sin x)_i - sin(x_i) (K cos x)_i.
    Tensor s = sin(x);
    Tensor c = sin(add(x, tape.constant(1.5707963267948966)));
    Tensor km = tape.stage(k.K);
    Tensor coupling = scale(sub(mul(c, matmul(km, s)), mul(s, matmul(km, c))),
                            1.0 / static_cast<double>(k.dim));
    return add(tape.stage(k.omega), coupling);
}

} // namespace

Tensor eval_drift(Tape& tape, const DriftSpec& spec, const Tensor& x, const Tensor& u, double t) {
    (void)t;
    return std::visit(
        [&](const auto& d) -> Tensor {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, OuDrift>) {
                check_state(x, d.dim, "ou");
                Tensor a = softplus(tape.stage(d.a_raw));
                return mul(a, sub(tape.stage(d.m), x));
            } else if constexpr (std::is_same_v<T, WilsonCowanDrift>) {
                check_state(x, d.dim, "wilson-cowan");
                check_input(u, d.input_dim, "wilson-cowan");
                Tensor tau = softplus(tape.stage(d.tau_raw));
                Tensor inv_tau = exp(neg(log(tau)));
                Tensor rec = matmul(tape.stage(d.J), tanh(x));
                Tensor field = add(neg(x), rec);
                if (d.input_dim > 0) field = add(field, matmul(tape.stage(d.B), u));
                return mul(inv_tau, field);
            } else if constexpr (std::is_same_v<T, KuramotoDrift>) {
                return kuramoto_field(tape, d, x);
            } else if constexpr (std::is_same_v<T, KuramotoResidualDrift>) {
                return add(kuramoto_field(tape, d.base, x), d.residual.forward(tape, x));
            } else if constexpr (std::is_same_v<T, GraphCoupledDrift>) {
                check_state(x, d.dim, "graph-coupled");
                check_input(u, d.input_dim, "graph-coupled");
                Tensor out = d.local.forward(tape, with_input(tape, x, u));
                Tensor coupling{nullptr, -1};
                for (int i = 0; i < d.dim; ++i) {
                    Tensor xi = slice(x, i, 1);
                    Tensor acc{nullptr, -1};
                    for (int j = 0; j < d.dim; ++j) {
                        const double a_ij = d.adjacency[static_cast<std::size_t>(i * d.dim + j)];
                        if (a_ij == 0.0) continue;
                        Tensor gij = d.pair.forward(tape, concat(slice(x, j, 1), xi));
                        Tensor term = scale(gij, a_ij);
                        acc = acc.valid() ? add(acc, term) : term;
                    }
                    if (!acc.valid()) acc = tape.constant(0.0);
                    coupling = coupling.valid() ? concat(coupling, acc) : acc;
                }
                return add(out, coupling);
            } else {
                static_assert(std::is_same_v<T, NeuralDrift>);
                check_state(x, d.dim, "neural");
                check_input(u, d.input_dim, "neural");
                return d.net.forward(tape, with_input(tape, x, u));
            }
        },
        spec);
}

int drift_dim(const DriftSpec& spec) {
    return std::visit(
        [](const auto& d) -> int {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, KuramotoResidualDrift>) return d.base.dim;
            else return d.dim;
        },
        spec);
}

std::optional<int> drift_input_dim(const DriftSpec& spec) {
    return std::visit(
        [](const auto& d) -> std::optional<int> {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, WilsonCowanDrift> ||
                          std::is_same_v<T, GraphCoupledDrift> ||
                          std::is_same_v<T, NeuralDrift>) {
                return d.input_dim;
            } else {
                return std::nullopt;
            }
        },
        spec);
}

void collect_drift_params(DriftSpec& spec, std::vector<Param*>& out) {
    std::visit(
        [&](auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, OuDrift>) {
                out.push_back(&d.a_raw);
                out.push_back(&d.m);
            } else if constexpr (std::is_same_v<T, WilsonCowanDrift>) {
                out.push_back(&d.tau_raw);
                out.push_back(&d.J);
                out.push_back(&d.B);
            } else if constexpr (std::is_same_v<T, KuramotoDrift>) {
                out.push_back(&d.omega);
                out.push_back(&d.K);
            } else if constexpr (std::is_same_v<T, KuramotoResidualDrift>) {
                out.push_back(&d.base.omega);
                out.push_back(&d.base.K);
                d.residual.collect(out);
            } else if constexpr (std::is_same_v<T, GraphCoupledDrift>) {
                d.local.collect(out);
                d.pair.collect(out);
            } else {
                static_assert(std::is_same_v<T, NeuralDrift>);
                d.net.collect(out);
            }
        },
        spec);
}

const char* drift_variant_name(const DriftSpec& spec) {
    return std::visit(
        [](const auto& d) -> const char* {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, OuDrift>) return "ou";
            else if constexpr (std::is_same_v<T, WilsonCowanDrift>) return "wilson-cowan";
            else if constexpr (std::is_same_v<T, KuramotoDrift>) return "kuramoto";
            else if constexpr (std::is_same_v<T, KuramotoResidualDrift>) return "kuramoto-residual";
            else if constexpr (std::is_same_v<T, GraphCoupledDrift>) return "graph-coupled";
            else return "neural";
        },
        spec);
}

void init_drift_params(DriftSpec& spec, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "drift-init"));
    std::visit(
        [&](auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, KuramotoResidualDrift>) {
                d.residual.init(rng);
                d.residual.zero_last_layer();
            } else if constexpr (std::is_same_v<T, GraphCoupledDrift>) {
                d.local.init(rng);
                d.pair.init(rng);
            } else if constexpr (std::is_same_v<T, NeuralDrift>) {
                d.net.init(rng);
            }
        },
        spec);
}

// ---- diffusion variants ---------------------------------------------------------

ConstantDiagonal::ConstantDiagonal(int d, double b)
    : dim(d), b_raw("b_raw", Shape::vec(d)) {
    std::vector<double> v(static_cast<std::size_t>(d), b);
    set_b(v);
}

std::vector<double> ConstantDiagonal::b() const {
    std::vector<double> out(b_raw.value.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_softplus(b_raw.value[i]);
    return out;
}

void ConstantDiagonal::set_b(std::span<const double> values) {
    if (static_cast<int>(values.size()) != dim) {
        throw ParamError("ConstantDiagonal: " + std::to_string(values.size()) +
                         " values for dim " + std::to_string(dim));
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] < 0.0) throw ParamError("ConstantDiagonal: negative diffusion scale");
        b_raw.value[i] = values[i] <= 1e-12 ? -40.0 : softplus_inverse(values[i]);
    }
}

StateDependentDiagonal::StateDependentDiagonal(int d, int d_u, const std::vector<int>& hidden)
    : dim(d), input_dim(d_u) {
    std::vector<int> widths{d + d_u};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(d);
    net = Mlp("sigma", widths, OutputAct::Softplus);
}

Tensor eval_diffusion(Tape& tape, const DiffusionSpec& spec, const Tensor& x, const Tensor& u,
                      double t) {
    (void)t;
    return std::visit(
        [&](const auto& d) -> Tensor {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, ConstantDiagonal>) {
                check_state(x, d.dim, "constant-diagonal");
                return softplus(tape.stage(d.b_raw));
            } else {
                static_assert(std::is_same_v<T, StateDependentDiagonal>);
                check_state(x, d.dim, "state-dependent-diagonal");
                check_input(u, d.input_dim, "state-dependent-diagonal");
                return d.net.forward(tape, with_input(tape, x, u));
            }
        },
        spec);
}

int diffusion_dim(const DiffusionSpec& spec) {
    return std::visit([](const auto& d) { return d.dim; }, spec);
}

void collect_diffusion_params(DiffusionSpec& spec, std::vector<Param*>& out) {
    std::visit(
        [&](auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, ConstantDiagonal>) {
                out.push_back(&d.b_raw);
            } else {
                d.net.collect(out);
            }
        },
        spec);
}

const char* diffusion_variant_name(const DiffusionSpec& spec) {
    return std::holds_alternative<ConstantDiagonal>(spec) ? "constant" : "state-dependent";
}

void init_diffusion_params(DiffusionSpec& spec, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "diffusion-init"));
    if (auto* sd = std::get_if<StateDependentDiagonal>(&spec)) sd->net.init(rng);
}

} // namespace udekit
