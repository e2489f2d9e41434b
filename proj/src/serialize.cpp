#include "udekit/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace udekit {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!ok.count(it.key())) {
            throw ConfigError(where + ": unknown key '" + it.key() + "'");
        }
    }
}

double num_at(const json& j, const std::string& where, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
    return j.at(key).get<double>();
}

int int_at(const json& j, const std::string& where, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
    return j.at(key).get<int>();
}

bool bool_at(const json& j, const std::string& where, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw ConfigError(where + "." + key + ": expected a boolean");
    return j.at(key).get<bool>();
}

std::string str_at(const json& j, const std::string& where, const char* key,
                   const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw ConfigError(where + "." + key + ": expected a string");
    return j.at(key).get<std::string>();
}

// Scalar broadcasts to `dim` entries; arrays must match exactly.
std::vector<double> vec_at(const json& j, const std::string& where, const char* key, int dim,
                           double fallback) {
    if (!j.contains(key)) return std::vector<double>(static_cast<std::size_t>(dim), fallback);
    const json& v = j.at(key);
    if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(dim), v.get<double>());
    if (!v.is_array()) throw ConfigError(where + "." + key + ": expected a number or array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(where + "." + key + ": expected numbers");
        out.push_back(x.get<double>());
    }
    if (static_cast<int>(out.size()) != dim) {
        throw ConfigError(where + "." + key + ": has " + std::to_string(out.size()) +
                          " entries, expected " + std::to_string(dim));
    }
    return out;
}

// Scalar broadcasts to a constant matrix; nested arrays must be r x c.
std::vector<double> mat_at(const json& j, const std::string& where, const char* key, int r, int c,
                           double fallback) {
    if (!j.contains(key)) return std::vector<double>(static_cast<std::size_t>(r * c), fallback);
    const json& v = j.at(key);
    if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(r * c), v.get<double>());
    if (!v.is_array() || static_cast<int>(v.size()) != r) {
        throw ConfigError(where + "." + key + ": expected " + std::to_string(r) + " rows");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(r) * static_cast<std::size_t>(c));
    for (const auto& row : v) {
        if (!row.is_array() || static_cast<int>(row.size()) != c) {
            throw ConfigError(where + "." + key + ": expected rows of " + std::to_string(c));
        }
        for (const auto& x : row) {
            if (!x.is_number()) throw ConfigError(where + "." + key + ": expected numbers");
            out.push_back(x.get<double>());
        }
    }
    return out;
}

std::vector<int> widths_at(const json& j, const std::string& where, const char* key,
                           std::vector<int> fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array of widths");
    std::vector<int> out;
    for (const auto& x : v) {
        if (!x.is_number_integer() || x.get<int>() < 1) {
            throw ConfigError(where + "." + key + ": widths must be positive integers");
        }
        out.push_back(x.get<int>());
    }
    return out;
}

json params_to_json(const std::vector<Param*>& params) {
    json out = json::object();
    for (const Param* p : params) out[p->name] = p->value;
    return out;
}

void params_from_json(const json& j, const std::vector<Param*>& params, const std::string& where) {
    for (Param* p : params) {
        if (!j.contains(p->name)) {
            throw ConfigError(where + ": checkpoint is missing parameter '" + p->name + "'");
        }
        const auto vals = j.at(p->name).get<std::vector<double>>();
        if (vals.size() != p->value.size()) {
            throw ConfigError(where + ": parameter '" + p->name + "' has " +
                              std::to_string(vals.size()) + " values, expected " +
                              std::to_string(p->value.size()));
        }
        p->value = vals;
    }
}

std::vector<int> mlp_hidden(const Mlp& m) {
    if (m.widths.size() <= 2) return {};
    return std::vector<int>(m.widths.begin() + 1, m.widths.end() - 1);
}

Interp interp_from_string(const std::string& s) {
    if (s == "linear") return Interp::Linear;
    if (s == "zero-order-hold" || s == "zoh") return Interp::ZeroOrderHold;
    throw ConfigError("unknown interpolation '" + s + "'");
}

const char* interp_name(Interp i) {
    return i == Interp::Linear ? "linear" : "zero-order-hold";
}

} // namespace

// ---- drift spec ---------------------------------------------------------------

DriftSpec drift_from_config(const json& cfg, int latent_dim, int input_dim,
                            std::uint64_t init_seed) {
    const std::string where = "drift";
    const std::string variant = str_at(cfg, where, "variant", "");
    if (variant == "ou") {
        check_keys(cfg, where, {"variant", "a", "m"});
        const double a = num_at(cfg, where, "a", 1.0);
        const double m = num_at(cfg, where, "m", 0.0);
        if (a < 0.0) throw ConfigError("drift.a: reversion rate must be nonnegative");
        return OuDrift(latent_dim, a <= 1e-12 ? 1e-12 : a, m);
    }
    if (variant == "wilson-cowan") {
        check_keys(cfg, where, {"variant", "tau", "J", "B"});
        WilsonCowanDrift d(latent_dim, input_dim, num_at(cfg, where, "tau", 1.0));
        d.J.value = mat_at(cfg, where, "J", latent_dim, latent_dim, 0.0);
        d.B.value = mat_at(cfg, where, "B", latent_dim, input_dim, 0.0);
        return d;
    }
    if (variant == "kuramoto") {
        check_keys(cfg, where, {"variant", "omega", "K"});
        KuramotoDrift d(latent_dim);
        d.omega.value = vec_at(cfg, where, "omega", latent_dim, 0.0);
        d.K.value = mat_at(cfg, where, "K", latent_dim, latent_dim, 0.0);
        return d;
    }
    if (variant == "kuramoto-residual") {
        check_keys(cfg, where, {"variant", "omega", "K", "hidden"});
        KuramotoResidualDrift d(latent_dim, widths_at(cfg, where, "hidden", {16}));
        d.base.omega.value = vec_at(cfg, where, "omega", latent_dim, 0.0);
        d.base.K.value = mat_at(cfg, where, "K", latent_dim, latent_dim, 0.0);
        DriftSpec spec = std::move(d);
        init_drift_params(spec, init_seed);
        return spec;
    }
    if (variant == "graph-coupled") {
        check_keys(cfg, where, {"variant", "adjacency", "local_hidden", "pair_hidden"});
        if (!cfg.contains("adjacency")) throw ConfigError("drift.adjacency is required");
        GraphCoupledDrift d(latent_dim, input_dim,
                            mat_at(cfg, where, "adjacency", latent_dim, latent_dim, 0.0),
                            widths_at(cfg, where, "local_hidden", {16}),
                            widths_at(cfg, where, "pair_hidden", {8}));
        DriftSpec spec = std::move(d);
        init_drift_params(spec, init_seed);
        return spec;
    }
    if (variant == "neural") {
        check_keys(cfg, where, {"variant", "hidden"});
        NeuralDrift d(latent_dim, input_dim, widths_at(cfg, where, "hidden", {32}));
        DriftSpec spec = std::move(d);
        init_drift_params(spec, init_seed);
        return spec;
    }
    throw ConfigError("drift.variant: unknown variant '" + variant + "'");
}

namespace {

json drift_to_json(DriftSpec& spec) {
    json out;
    out["variant"] = drift_variant_name(spec);
    out["dim"] = drift_dim(spec);
    std::visit(
        [&](auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, WilsonCowanDrift>) {
                out["input_dim"] = d.input_dim;
            } else if constexpr (std::is_same_v<T, KuramotoResidualDrift>) {
                out["hidden"] = mlp_hidden(d.residual);
            } else if constexpr (std::is_same_v<T, GraphCoupledDrift>) {
                out["input_dim"] = d.input_dim;
                out["adjacency"] = d.adjacency;
                out["local_hidden"] = mlp_hidden(d.local);
                out["pair_hidden"] = mlp_hidden(d.pair);
            } else if constexpr (std::is_same_v<T, NeuralDrift>) {
                out["input_dim"] = d.input_dim;
                out["hidden"] = mlp_hidden(d.net);
            }
        },
        spec);
    std::vector<Param*> params;
    collect_drift_params(spec, params);
    out["params"] = params_to_json(params);
    return out;
}

DriftSpec drift_from_checkpoint(const json& j, const std::string& where) {
    const std::string variant = j.at("variant").get<std::string>();
    const int dim = j.at("dim").get<int>();
    DriftSpec spec = OuDrift(1);
    if (variant == "ou") {
        spec = OuDrift(dim);
    } else if (variant == "wilson-cowan") {
        spec = WilsonCowanDrift(dim, j.at("input_dim").get<int>());
    } else if (variant == "kuramoto") {
        spec = KuramotoDrift(dim);
    } else if (variant == "kuramoto-residual") {
        spec = KuramotoResidualDrift(dim, j.at("hidden").get<std::vector<int>>());
    } else if (variant == "graph-coupled") {
        spec = GraphCoupledDrift(dim, j.at("input_dim").get<int>(),
                                 j.at("adjacency").get<std::vector<double>>(),
                                 j.at("local_hidden").get<std::vector<int>>(),
                                 j.at("pair_hidden").get<std::vector<int>>());
    } else if (variant == "neural") {
        spec = NeuralDrift(dim, j.at("input_dim").get<int>(),
                           j.at("hidden").get<std::vector<int>>());
    } else {
        throw ConfigError(where + ": unknown variant '" + variant + "'");
    }
    std::vector<Param*> params;
    collect_drift_params(spec, params);
    params_from_json(j.at("params"), params, where);
    return spec;
}

json diffusion_to_json(DiffusionSpec& spec) {
    json out;
    out["variant"] = diffusion_variant_name(spec);
    out["dim"] = diffusion_dim(spec);
    if (const auto* sd = std::get_if<StateDependentDiagonal>(&spec)) {
        out["input_dim"] = sd->input_dim;
        out["hidden"] = mlp_hidden(sd->net);
    }
    std::vector<Param*> params;
    collect_diffusion_params(spec, params);
    out["params"] = params_to_json(params);
    return out;
}

DiffusionSpec diffusion_from_checkpoint(const json& j) {
    const std::string variant = j.at("variant").get<std::string>();
    const int dim = j.at("dim").get<int>();
    DiffusionSpec spec = ConstantDiagonal(1);
    if (variant == "constant") {
        spec = ConstantDiagonal(dim);
    } else if (variant == "state-dependent") {
        spec = StateDependentDiagonal(dim, j.at("input_dim").get<int>(),
                                      j.at("hidden").get<std::vector<int>>());
    } else {
        throw ConfigError("diffusion: unknown variant '" + variant + "'");
    }
    std::vector<Param*> params;
    collect_diffusion_params(spec, params);
    params_from_json(j.at("params"), params, "diffusion");
    return spec;
}

json observation_to_json(ObservationModel& obs) {
    json out;
    out["kind"] = obs.kind == ObservationModel::Kind::Poisson ? "poisson" : "gaussian";
    switch (obs.readout_kind) {
        case ObservationModel::ReadoutKind::Identity: out["readout"] = "identity"; break;
        case ObservationModel::ReadoutKind::Affine: out["readout"] = "affine"; break;
        case ObservationModel::ReadoutKind::MlpReadout: out["readout"] = "mlp"; break;
    }
    out["latent_dim"] = obs.latent_dim;
    out["obs_dim"] = obs.obs_dim;
    out["bin_width"] = obs.bin_width;
    if (obs.readout_kind == ObservationModel::ReadoutKind::MlpReadout) {
        out["hidden"] = mlp_hidden(obs.readout);
    }
    std::vector<Param*> params;
    obs.collect(params);
    out["params"] = params_to_json(params);
    return out;
}

ObservationModel observation_from_checkpoint(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const std::string readout = j.at("readout").get<std::string>();
    const int d_x = j.at("latent_dim").get<int>();
    const int d_y = j.at("obs_dim").get<int>();
    ObservationModel obs;
    if (kind == "poisson") {
        obs = ObservationModel::poisson(d_x, d_y, j.at("bin_width").get<double>());
    } else if (readout == "identity") {
        obs = ObservationModel::gaussian_identity(d_x);
    } else if (readout == "affine") {
        obs = ObservationModel::gaussian_affine(d_x, d_y);
    } else {
        obs = ObservationModel::gaussian_mlp(d_x, d_y, j.at("hidden").get<std::vector<int>>());
    }
    std::vector<Param*> params;
    obs.collect(params);
    params_from_json(j.at("params"), params, "observation");
    return obs;
}

} // namespace

// ---- model checkpoints -----------------------------------------------------------

json model_to_json(LatentUdeModel& model, const AdamState* opt, int next_epoch) {
    json out;
    out["schema"] = "udekit-model-v1";
    out["latent_dim"] = model.latent_dim;
    out["input_dim"] = model.input_dim;
    out["obs_dim"] = model.obs_dim;
    out["seed"] = model.seed;
    out["probabilistic_x0"] = model.probabilistic_x0;
    out["sigma_floor"] = model.sigma_floor;

    json enc;
    enc["encoding"] = model.encoder.encoding == StimulusEncoder::Encoding::Identity ? "identity"
                                                                                    : "affine";
    enc["interpolation"] = interp_name(model.encoder.interpolation);
    enc["time_channel"] = model.encoder.time_channel;
    enc["stim_dim"] = model.encoder.stim_dim;
    enc["out_dim"] = model.encoder.out_dim;
    {
        std::vector<Param*> params;
        model.encoder.collect(params);
        enc["params"] = params_to_json(params);
    }
    out["encoder"] = enc;

    json rec;
    rec["hidden"] = model.recognition.hidden;
    {
        std::vector<Param*> params;
        model.recognition.collect(params);
        rec["params"] = params_to_json(params);
    }
    out["recognition"] = rec;

    out["prior_drift"] = drift_to_json(model.prior_drift);

    json post;
    post["hidden"] = mlp_hidden(model.posterior_drift.net);
    {
        std::vector<Param*> params;
        model.posterior_drift.net.collect(params);
        post["params"] = params_to_json(params);
    }
    out["posterior_drift"] = post;

    out["diffusion"] = diffusion_to_json(model.diffusion);
    out["observation"] = observation_to_json(model.observation);

    if (opt != nullptr) {
        json o;
        o["step_count"] = opt->step_count;
        o["m"] = opt->m;
        o["v"] = opt->v;
        o["next_epoch"] = next_epoch;
        out["optimizer"] = o;
    }
    return out;
}

LatentUdeModel model_from_json(const json& j) {
    if (str_at(j, "model", "schema", "") != "udekit-model-v1") {
        throw ConfigError("model: unknown or missing schema tag");
    }
    LatentUdeModel model;
    model.latent_dim = j.at("latent_dim").get<int>();
    model.input_dim = j.at("input_dim").get<int>();
    model.obs_dim = j.at("obs_dim").get<int>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.probabilistic_x0 = j.at("probabilistic_x0").get<bool>();
    model.sigma_floor = j.at("sigma_floor").get<double>();

    const json& enc = j.at("encoder");
    const Interp interp = interp_from_string(enc.at("interpolation").get<std::string>());
    const bool tc = enc.at("time_channel").get<bool>();
    if (enc.at("encoding").get<std::string>() == "identity") {
        model.encoder = StimulusEncoder::identity(enc.at("stim_dim").get<int>(), interp, tc);
    } else {
        const int out_dim = enc.at("out_dim").get<int>();
        model.encoder = StimulusEncoder::affine(enc.at("stim_dim").get<int>(),
                                                out_dim - (tc ? 1 : 0), interp, tc);
        std::vector<Param*> params;
        model.encoder.collect(params);
        params_from_json(enc.at("params"), params, "encoder");
    }

    model.prior_drift = drift_from_checkpoint(j.at("prior_drift"), "prior_drift");
    model.diffusion = diffusion_from_checkpoint(j.at("diffusion"));
    model.observation = observation_from_checkpoint(j.at("observation"));

    const json& rec = j.at("recognition");
    model.recognition = RecognitionModel(model.obs_dim, model.input_dim,
                                         rec.at("hidden").get<int>(), model.latent_dim,
                                         model.probabilistic_x0);
    {
        std::vector<Param*> params;
        model.recognition.collect(params);
        params_from_json(rec.at("params"), params, "recognition");
    }

    const json& post = j.at("posterior_drift");
    model.posterior_drift = NeuralDrift(model.latent_dim, model.input_dim + model.obs_dim,
                                        post.at("hidden").get<std::vector<int>>());
    {
        std::vector<Param*> params;
        model.posterior_drift.net.collect(params);
        params_from_json(post.at("params"), params, "posterior_drift");
    }

    model.validate();
    return model;
}

bool optimizer_from_json(const json& j, AdamState& opt, int& next_epoch) {
    if (!j.contains("optimizer") || j.at("optimizer").is_null()) return false;
    const json& o = j.at("optimizer");
    opt.step_count = o.at("step_count").get<long>();
    opt.m = o.at("m").get<std::vector<double>>();
    opt.v = o.at("v").get<std::vector<double>>();
    next_epoch = o.at("next_epoch").get<int>();
    return true;
}

void save_model(LatentUdeModel& model, const std::string& file, const AdamState* opt,
                int next_epoch) {
    std::ofstream os(file);
    if (!os) throw ParamError("save_model: cannot open '" + file + "'");
    os << model_to_json(model, opt, next_epoch).dump(2) << "\n";
}

LatentUdeModel load_model(const std::string& file, json* raw) {
    std::ifstream is(file);
    if (!is) throw ParamError("load_model: cannot open '" + file + "'");
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError("load_model: parse failure: " + std::string(e.what()));
    }
    if (raw != nullptr) *raw = j;
    try {
        return model_from_json(j);
    } catch (const json::exception& e) {
        throw ConfigError("load_model: field error: " + std::string(e.what()));
    }
}

// ---- run configuration -------------------------------------------------------------

RunConfig parse_run_config(const json& doc) {
    check_keys(doc, "config", {"dataset", "model", "train", "output"});
    RunConfig cfg;
    if (!doc.contains("output") || !doc.at("output").is_string()) {
        throw ConfigError("config.output: required output directory string");
    }
    cfg.output = doc.at("output").get<std::string>();
    if (!doc.contains("dataset")) throw ConfigError("config.dataset: required section");
    cfg.dataset = doc.at("dataset");
    check_keys(cfg.dataset, "dataset", {"generator", "path"});
    if (!cfg.dataset.contains("generator") && !cfg.dataset.contains("path")) {
        throw ConfigError("dataset: needs a 'generator' or a 'path'");
    }
    cfg.model = doc.value("model", json());
    cfg.train = doc.value("train", json());
    return cfg;
}

RunConfig load_run_config(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot open config '" + file + "'");
    json doc;
    try {
        is >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("config parse failure: " + std::string(e.what()));
    }
    return parse_run_config(doc);
}

std::string dataset_dir(const RunConfig& cfg) {
    if (cfg.dataset.contains("path")) {
        if (!cfg.dataset.at("path").is_string()) throw ConfigError("dataset.path: expected a string");
        return cfg.dataset.at("path").get<std::string>();
    }
    return (std::filesystem::path(cfg.output) / "dataset").string();
}

namespace {

ObservationModel observation_from_config(const json& cfg, int latent_dim, double bin_width,
                                         bool generator_side) {
    const std::string where = "observation";
    const std::string kind = str_at(cfg, where, "kind", "gaussian");
    if (kind == "poisson") {
        if (generator_side) {
            check_keys(cfg, where, {"kind", "obs_dim", "bin_width", "W", "c"});
        } else {
            check_keys(cfg, where, {"kind", "obs_dim"});
        }
        const int d_y = int_at(cfg, where, "obs_dim", latent_dim);
        const double bw = generator_side ? num_at(cfg, where, "bin_width", bin_width) : bin_width;
        ObservationModel obs = ObservationModel::poisson(latent_dim, d_y, bw);
        obs.init(0);
        if (generator_side) {
            if (cfg.contains("W")) obs.readout.weights[0].value = mat_at(cfg, where, "W", d_y, latent_dim, 0.0);
            if (cfg.contains("c")) obs.readout.biases[0].value = vec_at(cfg, where, "c", d_y, 0.0);
        }
        return obs;
    }
    if (kind != "gaussian") throw ConfigError("observation.kind: unknown kind '" + kind + "'");
    const std::string readout = str_at(cfg, where, "readout", "identity");
    if (readout == "identity") {
        check_keys(cfg, where, {"kind", "readout", "s"});
        ObservationModel obs = ObservationModel::gaussian_identity(latent_dim,
                                                                   num_at(cfg, where, "s", 0.1));
        return obs;
    }
    if (readout == "affine") {
        check_keys(cfg, where, {"kind", "readout", "obs_dim", "s", "W", "c"});
        const int d_y = int_at(cfg, where, "obs_dim", latent_dim);
        ObservationModel obs = ObservationModel::gaussian_affine(latent_dim, d_y,
                                                                 num_at(cfg, where, "s", 0.1));
        obs.init(0);
        if (cfg.contains("W")) obs.readout.weights[0].value = mat_at(cfg, where, "W", d_y, latent_dim, 0.0);
        if (cfg.contains("c")) obs.readout.biases[0].value = vec_at(cfg, where, "c", d_y, 0.0);
        return obs;
    }
    if (readout == "mlp") {
        check_keys(cfg, where, {"kind", "readout", "obs_dim", "s", "hidden"});
        const int d_y = int_at(cfg, where, "obs_dim", latent_dim);
        return ObservationModel::gaussian_mlp(latent_dim, d_y,
                                              widths_at(cfg, where, "hidden", {16}),
                                              num_at(cfg, where, "s", 0.1));
    }
    throw ConfigError("observation.readout: unknown readout '" + readout + "'");
}

} // namespace

GeneratorSpec generator_from_config(const json& gen) {
    const std::string where = "generator";
    check_keys(gen, where,
               {"kind", "latent_dim", "a", "m", "tau", "J", "B", "omega", "K", "hidden",
                "adjacency", "local_hidden", "pair_hidden", "diffusion_b", "observation", "x0",
                "stimulus", "trajectories", "samples", "dt", "seed", "method", "pre_samples"});
    GeneratorSpec g;
    const int d = int_at(gen, where, "latent_dim", 1);
    if (d < 1) throw ConfigError("generator.latent_dim must be >= 1");

    // stimulus first: the drift may consume it
    if (gen.contains("stimulus")) {
        const json& st = gen.at("stimulus");
        check_keys(st, "stimulus", {"kind", "dim", "amplitude", "frequency"});
        const std::string kind = str_at(st, "stimulus", "kind", "none");
        if (kind == "sine") {
            g.stim_kind = GeneratorSpec::StimKind::Sine;
            g.stim_dim = int_at(st, "stimulus", "dim", 1);
            g.stim_amplitude = num_at(st, "stimulus", "amplitude", 1.0);
            g.stim_frequency = num_at(st, "stimulus", "frequency", 0.5);
            if (g.stim_dim < 1) throw ConfigError("stimulus.dim must be >= 1");
        } else if (kind != "none") {
            throw ConfigError("stimulus.kind: unknown kind '" + kind + "'");
        }
    }

    g.seed = static_cast<std::uint64_t>(num_at(gen, where, "seed", 0.0));
    json drift_cfg;
    drift_cfg["variant"] = str_at(gen, where, "kind", "ou");
    for (const char* key : {"a", "m", "tau", "J", "B", "omega", "K", "hidden", "adjacency",
                            "local_hidden", "pair_hidden"}) {
        if (gen.contains(key)) drift_cfg[key] = gen.at(key);
    }
    g.drift = drift_from_config(drift_cfg, d, g.stim_dim, derive_seed(g.seed, "generator-drift"));

    g.diffusion_b = vec_at(gen, where, "diffusion_b", d, 0.1);
    g.observation = observation_from_config(gen.value("observation", json::object()), d, 1.0, true);

    if (gen.contains("x0")) {
        const json& x0 = gen.at("x0");
        check_keys(x0, "x0", {"kind", "value", "mean", "std"});
        const std::string kind = str_at(x0, "x0", "kind", "normal");
        if (kind == "fixed") {
            g.x0_kind = GeneratorSpec::X0Kind::Fixed;
            g.x0_mean = vec_at(x0, "x0", "value", d, 0.0);
        } else if (kind == "normal") {
            g.x0_kind = GeneratorSpec::X0Kind::Normal;
            g.x0_mean = vec_at(x0, "x0", "mean", d, 0.0);
            g.x0_std = num_at(x0, "x0", "std", 1.0);
        } else {
            throw ConfigError("x0.kind: unknown kind '" + kind + "'");
        }
    } else {
        g.x0_mean.assign(static_cast<std::size_t>(d), 0.0);
    }

    g.trajectories = int_at(gen, where, "trajectories", 1);
    g.samples = int_at(gen, where, "samples", 2);
    g.dt = num_at(gen, where, "dt", 0.01);
    g.method = solve_method_from_string(str_at(gen, where, "method", "euler-maruyama"));
    g.pre_samples = int_at(gen, where, "pre_samples", 0);
    return g;
}

LatentUdeModel build_model(const json& model_cfg, int stim_dim, int obs_dim, Modality modality,
                           double bin_width) {
    const std::string where = "model";
    check_keys(model_cfg, where,
               {"latent_dim", "seed", "drift", "diffusion", "encoder", "recognition", "posterior",
                "observation", "sigma_floor"});
    LatentUdeModel model;
    model.latent_dim = int_at(model_cfg, where, "latent_dim", 1);
    if (model.latent_dim < 1) throw ConfigError("model.latent_dim must be >= 1");
    model.obs_dim = obs_dim;
    model.seed = static_cast<std::uint64_t>(num_at(model_cfg, where, "seed", 1.0));
    model.sigma_floor = num_at(model_cfg, where, "sigma_floor", 1e-4);

    // encoder
    {
        const json& enc = model_cfg.value("encoder", json::object());
        check_keys(enc, "encoder", {"encoding", "interpolation", "time_channel", "output_dim"});
        const std::string encoding = str_at(enc, "encoder", "encoding", "identity");
        const Interp interp = interp_from_string(str_at(enc, "encoder", "interpolation", "linear"));
        const bool tc = bool_at(enc, "encoder", "time_channel", false);
        if (encoding == "identity") {
            model.encoder = StimulusEncoder::identity(stim_dim, interp, tc);
        } else if (encoding == "affine") {
            const int out = int_at(enc, "encoder", "output_dim", stim_dim);
            model.encoder = StimulusEncoder::affine(stim_dim, out, interp, tc);
            model.encoder.init(derive_seed(model.seed, "encoder"));
        } else {
            throw ConfigError("encoder.encoding: unknown encoding '" + encoding + "'");
        }
        model.input_dim = model.encoder.out_dim;
    }

    if (!model_cfg.contains("drift")) throw ConfigError("model.drift: required section");
    model.prior_drift = drift_from_config(model_cfg.at("drift"), model.latent_dim, model.input_dim,
                                          derive_seed(model.seed, "prior"));

    // diffusion
    {
        const json& dif = model_cfg.value("diffusion", json::object());
        check_keys(dif, "diffusion", {"variant", "b", "hidden"});
        const std::string variant = str_at(dif, "diffusion", "variant", "constant");
        if (variant == "constant") {
            ConstantDiagonal cd(model.latent_dim, 0.1);
            if (dif.contains("b")) {
                const auto b = vec_at(dif, "diffusion", "b", model.latent_dim, 0.1);
                cd.set_b(b);
            }
            model.diffusion = cd;
        } else if (variant == "state-dependent") {
            StateDependentDiagonal sd(model.latent_dim, model.input_dim,
                                      widths_at(dif, "diffusion", "hidden", {16}));
            model.diffusion = sd;
            init_diffusion_params(model.diffusion, derive_seed(model.seed, "diffusion"));
        } else {
            throw ConfigError("diffusion.variant: unknown variant '" + variant + "'");
        }
    }

    // recognition
    {
        const json& rec = model_cfg.value("recognition", json::object());
        check_keys(rec, "recognition", {"hidden", "probabilistic_x0"});
        model.probabilistic_x0 = bool_at(rec, "recognition", "probabilistic_x0", false);
        model.recognition = RecognitionModel(obs_dim, model.input_dim,
                                             int_at(rec, "recognition", "hidden", 32),
                                             model.latent_dim, model.probabilistic_x0);
        model.recognition.init(derive_seed(model.seed, "recognition"));
    }

    // posterior drift over (x, u, yhat)
    {
        const json& post = model_cfg.value("posterior", json::object());
        check_keys(post, "posterior", {"hidden"});
        model.posterior_drift = NeuralDrift(model.latent_dim, model.input_dim + obs_dim,
                                            widths_at(post, "posterior", "hidden", {32}));
        Rng rng(derive_seed(model.seed, "posterior"));
        model.posterior_drift.net.init(rng);
    }

    // observation
    {
        const json& obs = model_cfg.value("observation", json::object());
        model.observation = observation_from_config(obs, model.latent_dim, bin_width, false);
        const bool poisson_model = model.observation.kind == ObservationModel::Kind::Poisson;
        if (poisson_model != (modality == Modality::Poisson)) {
            throw DataError("observation model kind does not match dataset modality");
        }
        if (model.observation.obs_dim != obs_dim) {
            throw DataError("observation model obs dim " + std::to_string(model.observation.obs_dim) +
                            " does not match dataset dim " + std::to_string(obs_dim));
        }
        if (model.observation.readout_kind == ObservationModel::ReadoutKind::MlpReadout) {
            model.observation.init(derive_seed(model.seed, "observation"));
        } else {
            model.observation.init(0);
        }
    }

    model.validate();
    return model;
}

TrainConfig train_config_from_json(const json& train_cfg) {
    const std::string where = "train";
    check_keys(train_cfg, where,
               {"lr", "epochs", "batch", "mc_paths", "dt", "anneal_frac", "seed", "window",
                "parallel", "resume", "eval_paths"});
    TrainConfig cfg;
    cfg.lr = num_at(train_cfg, where, "lr", 0.01);
    cfg.epochs = int_at(train_cfg, where, "epochs", 100);
    cfg.batch_size = int_at(train_cfg, where, "batch", 16);
    cfg.mc_paths = int_at(train_cfg, where, "mc_paths", 1);
    cfg.solver_dt = num_at(train_cfg, where, "dt", 0.0);
    cfg.anneal_frac = num_at(train_cfg, where, "anneal_frac", 0.2);
    cfg.seed = static_cast<std::uint64_t>(num_at(train_cfg, where, "seed", 1.0));
    cfg.parallel = bool_at(train_cfg, where, "parallel", true);
    if (train_cfg.contains("window")) {
        const json& w = train_cfg.at("window");
        check_keys(w, "train.window", {"fixed", "uniform"});
        if (w.contains("fixed")) {
            cfg.window = WindowDist::fixed(w.at("fixed").get<int>());
        } else if (w.contains("uniform")) {
            const auto bounds = w.at("uniform").get<std::vector<int>>();
            if (bounds.size() != 2) throw ConfigError("train.window.uniform: expected [lo, hi]");
            cfg.window = WindowDist::uniform(bounds[0], bounds[1]);
        } else {
            throw ConfigError("train.window: expected 'fixed' or 'uniform'");
        }
    }
    cfg.validate();
    return cfg;
}

} // namespace udekit
