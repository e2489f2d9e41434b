#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "udekit/ensemble.hpp"
#include "udekit/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace udekit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitMismatch = 3;

json metrics_to_json(const EvalMetrics& m) {
    json out;
    out["loglik_per_step"] = m.loglik_per_step;
    out["rmse"] = m.rmse;
    out["kl_per_unit_time"] = m.kl_per_unit_time;
    return out;
}

void write_history_csv(const std::string& file, const std::vector<EpochStats>& history,
                       int start_epoch) {
    std::ofstream os(file);
    if (!os) throw ParamError("cannot open '" + file + "'");
    os << "epoch,elbo,loglik,kl\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        os << (start_epoch + static_cast<int>(i)) << "," << format_double(history[i].elbo) << ","
           << format_double(history[i].loglik) << "," << format_double(history[i].kl) << "\n";
    }
}

// Minimal line-chart SVG: observed channels solid, reconstruction dashed.
std::string svg_plot(const std::vector<double>& times,
                     const std::vector<std::vector<double>>& observed,
                     const std::vector<std::vector<double>>& recon, const std::string& title) {
    const double width = 640.0, height = 280.0, ml = 46.0, mr = 12.0, mt = 24.0, mb = 30.0;
    double lo = 1e300, hi = -1e300;
    for (const auto& rows : {observed, recon}) {
        for (const auto& row : rows) {
            for (double v : row) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    const double t0 = times.front(), t1 = times.back();
    auto sx = [&](double t) { return ml + (t - t0) / (t1 - t0) * (width - ml - mr); };
    auto sy = [&](double v) { return height - mb - (v - lo) / (hi - lo) * (height - mt - mb); };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"280\" "
           "viewBox=\"0 0 640 280\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"640\" height=\"280\" fill=\"white\"/>\n";
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" "
                  "stroke=\"#888888\"/>\n",
                  ml, mt, width - ml - mr, height - mt - mb);
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">%s</text>\n",
                  ml, title.c_str());
    out += buf;

    const std::size_t channels = observed.empty() ? 0 : observed[0].size();
    for (std::size_t j = 0; j < channels; ++j) {
        const char* color = palette[j % 6];
        for (int which = 0; which < 2; ++which) {
            const auto& rows = which == 0 ? observed : recon;
            if (rows.empty()) continue;
            std::string pts;
            for (std::size_t n = 0; n < times.size(); ++n) {
                std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(times[n]), sy(rows[n][j]));
                pts += buf;
            }
            out += "<polyline fill=\"none\" stroke=\"";
            out += color;
            out += which == 0 ? "\" stroke-opacity=\"0.45\" stroke-width=\"1\""
                              : "\" stroke-width=\"1.5\" stroke-dasharray=\"5,3\"";
            out += " points=\"" + pts + "\"/>\n";
        }
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.1f\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"10\" "
                  "fill=\"#555555\">t</text>\n",
                  width - mr - 8.0, height - 8.0);
    out += buf;
    out += "</svg>\n";
    return out;
}

int run_simulate(const std::string& config_path) {
    RunConfig cfg = load_run_config(config_path);
    if (!cfg.dataset.contains("generator")) {
        throw ConfigError("simulate: config carries no dataset.generator section");
    }
    GeneratorSpec g = generator_from_config(cfg.dataset.at("generator"));
    TrajectoryDataset ds = generate_dataset(g);
    ds.generator = cfg.dataset.at("generator");
    const std::string dir = dataset_dir(cfg);
    save_dataset(ds, dir);
    std::cout << "wrote " << ds.trajectories.size() << " trajectories (" << ds.n_samples
              << " samples each) to " << dir << "\n";
    return kExitOk;
}

int run_train(const std::string& config_path) {
    RunConfig cfg = load_run_config(config_path);
    TrajectoryDataset ds = load_dataset(dataset_dir(cfg));
    const json train_section = cfg.train.is_null() ? json::object() : cfg.train;
    TrainConfig tc = train_config_from_json(train_section);

    LatentUdeModel model;
    AdamState opt;
    int start_epoch = 0;
    if (train_section.contains("resume")) {
        const std::string resume = train_section.at("resume").get<std::string>();
        json raw;
        model = load_model(resume, &raw);
        if (!optimizer_from_json(raw, opt, start_epoch)) {
            throw ConfigError("resume checkpoint '" + resume + "' carries no optimizer state");
        }
    } else {
        if (cfg.model.is_null()) throw ConfigError("train: config carries no model section");
        model = build_model(cfg.model, ds.stim_dim, ds.obs_dim, ds.modality, ds.bin_width);
    }

    TrainResult res = train(model, ds, tc, &opt, start_epoch);

    fs::create_directories(cfg.output);
    save_model(model, (fs::path(cfg.output) / "model.json").string(), &opt, tc.epochs);
    write_history_csv((fs::path(cfg.output) / "history.csv").string(), res.history, start_epoch);

    const int eval_paths = train_section.value("eval_paths", 8);
    EvalMetrics metrics = evaluate(model, ds, eval_paths, tc.seed, tc.window, tc.parallel);
    {
        std::ofstream os(fs::path(cfg.output) / "metrics.json");
        os << metrics_to_json(metrics).dump(2) << "\n";
    }
    std::cout << "trained " << (tc.epochs - start_epoch) << " epochs; final elbo "
              << (res.history.empty() ? 0.0 : res.history.back().elbo) << "\n";
    return kExitOk;
}

int run_eval(const std::string& model_path, const std::string& data_path, bool plot,
             const std::string& out_dir, int n_paths, std::uint64_t seed, int window) {
    LatentUdeModel model = load_model(model_path);
    TrajectoryDataset ds = load_dataset(data_path);
    const WindowDist dist = WindowDist::fixed(window);
    EvalMetrics metrics = evaluate(model, ds, n_paths, seed, dist);
    std::cout << metrics_to_json(metrics).dump(2) << "\n";

    if (plot) {
        if (out_dir.empty()) throw ConfigError("eval: --plot needs --out <dir>");
        fs::create_directories(out_dir);
        for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
            const Trajectory& traj = ds.trajectories[k];
            const int c = ds.pre_samples > 0 ? ds.pre_samples : dist.c_min;
            LatentPathSet ps = posterior_latents(model, traj, c, n_paths,
                                                 derive_seed(seed, "plot", k));
            std::vector<std::vector<double>> recon(traj.times.size(),
                                                   std::vector<double>(static_cast<std::size_t>(ds.obs_dim), 0.0));
            for (int p = 0; p < n_paths; ++p) {
                for (std::size_t n = 0; n < traj.times.size(); ++n) {
                    for (int j = 0; j < ds.obs_dim; ++j) {
                        recon[n][static_cast<std::size_t>(j)] +=
                            ps.readouts[static_cast<std::size_t>(p)][n][static_cast<std::size_t>(j)] /
                            static_cast<double>(n_paths);
                    }
                }
            }
            char name[48];
            std::snprintf(name, sizeof name, "plot_traj_%04zu.svg", k);
            std::ofstream os(fs::path(out_dir) / name);
            os << svg_plot(traj.times, traj.y, recon, std::string("trajectory ") + std::to_string(k));
        }
        std::cout << "wrote " << ds.trajectories.size() << " plots to " << out_dir << "\n";
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"udekit: latent stochastic universal-differential-equation toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset from a config");
    sim->add_option("config", config_path, "run configuration (JSON)")->required();

    auto* trn = app.add_subcommand("train", "train a latent UDE on a dataset");
    trn->add_option("config", config_path, "run configuration (JSON)")->required();

    std::string model_path, data_path, out_dir;
    bool plot = false;
    int n_paths = 8;
    int window = 10;
    std::uint64_t seed = 0;
    auto* evl = app.add_subcommand("eval", "evaluate a trained model on a dataset");
    evl->add_option("--model", model_path, "model checkpoint (JSON)")->required();
    evl->add_option("--data", data_path, "dataset directory")->required();
    evl->add_flag("--plot", plot, "write per-trajectory reconstruction SVGs");
    evl->add_option("--out", out_dir, "output directory for plots");
    evl->add_option("--paths", n_paths, "posterior sample paths per trajectory");
    evl->add_option("--seed", seed, "evaluation seed");
    evl->add_option("--window", window, "conditioning window when the dataset marks none");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (sim->parsed()) return run_simulate(config_path);
        if (trn->parsed()) return run_train(config_path);
        return run_eval(model_path, data_path, plot, out_dir, n_paths, seed, window);
    } catch (const TrainError& e) {
        std::cerr << "training diverged: " << e.what() << "\n";
        return kExitDivergence;
    } catch (const DataError& e) {
        std::cerr << "data/model mismatch: " << e.what() << "\n";
        return kExitMismatch;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
