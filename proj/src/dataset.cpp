#include "udekit/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace udekit {

namespace fs = std::filesystem;
using nlohmann::json;

Modality modality_from_string(const std::string& s) {
    if (s == "gaussian") return Modality::Gaussian;
    if (s == "poisson") return Modality::Poisson;
    throw ConfigError("unknown modality '" + s + "'");
}

const char* modality_name(Modality m) {
    return m == Modality::Gaussian ? "gaussian" : "poisson";
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void TrajectoryDataset::validate() const {
    if (trajectories.empty()) throw DataError("dataset holds no trajectories");
    for (std::size_t k = 0; k < trajectories.size(); ++k) {
        const Trajectory& tr = trajectories[k];
        const std::string where = "trajectory " + std::to_string(k);
        if (tr.times.empty()) throw DataError(where + ": empty time grid");
        if (tr.v.size() != tr.times.size() || tr.y.size() != tr.times.size()) {
            throw DataError(where + ": stimulus/response row count differs from time grid");
        }
        for (std::size_t n = 0; n + 1 < tr.times.size(); ++n) {
            if (!(tr.times[n] < tr.times[n + 1])) {
                throw DataError(where + ": times not strictly increasing at row " + std::to_string(n));
            }
        }
        for (const auto& row : tr.v) {
            if (static_cast<int>(row.size()) != stim_dim) {
                throw DataError(where + ": stimulus row width " + std::to_string(row.size()) +
                                " != " + std::to_string(stim_dim));
            }
        }
        for (const auto& row : tr.y) {
            if (static_cast<int>(row.size()) != obs_dim) {
                throw DataError(where + ": response row width " + std::to_string(row.size()) +
                                " != " + std::to_string(obs_dim));
            }
        }
    }
    if (pre_samples < 0) throw DataError("pre_samples must be nonnegative");
}

void write_csv(const std::string& file, const std::string& prefix,
               const std::vector<double>& times,
               const std::vector<std::vector<double>>& rows) {
    std::ofstream os(file);
    if (!os) throw DataError("cannot open '" + file + "' for writing");
    os << "t";
    const std::size_t width = rows.empty() ? 0 : rows[0].size();
    for (std::size_t j = 0; j < width; ++j) os << "," << prefix << j;
    os << "\n";
    for (std::size_t n = 0; n < times.size(); ++n) {
        os << format_double(times[n]);
        for (double x : rows[n]) os << "," << format_double(x);
        os << "\n";
    }
}

std::pair<std::vector<double>, std::vector<std::vector<double>>> read_csv(const std::string& file) {
    std::ifstream is(file);
    if (!is) throw DataError("cannot open '" + file + "'");
    std::string line;
    if (!std::getline(is, line)) throw DataError("'" + file + "' is empty");
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            const std::size_t comma = line.find(',', pos);
            const std::string tok = line.substr(pos, comma == std::string::npos ? std::string::npos
                                                                                : comma - pos);
            char* end = nullptr;
            const double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str()) throw DataError("'" + file + "': cannot parse '" + tok + "'");
            row.push_back(v);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        times.push_back(row[0]);
        row.erase(row.begin());
        if (first) {
            width = row.size();
            first = false;
        } else if (row.size() != width) {
            throw DataError("'" + file + "': ragged rows");
        }
        rows.push_back(std::move(row));
    }
    return {std::move(times), std::move(rows)};
}

namespace {

std::string traj_file(const std::string& dir, std::size_t k, const char* which) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "traj_%04zu_%s.csv", k, which);
    return (fs::path(dir) / buf).string();
}

} // namespace

void save_dataset(const TrajectoryDataset& ds, const std::string& dir) {
    ds.validate();
    fs::create_directories(dir);
    json manifest;
    manifest["schema"] = "udekit-dataset-v1";
    manifest["K"] = ds.trajectories.size();
    manifest["N"] = ds.n_samples;
    manifest["dt"] = ds.dt;
    manifest["dims"] = {{"stimulus", ds.stim_dim}, {"observation", ds.obs_dim}, {"latent", ds.latent_dim}};
    manifest["modality"] = modality_name(ds.modality);
    manifest["bin_width"] = ds.bin_width;
    manifest["pre_samples"] = ds.pre_samples;
    manifest["seed"] = ds.seed;
    manifest["generator"] = ds.generator;
    {
        std::ofstream os(fs::path(dir) / "manifest.json");
        if (!os) throw DataError("cannot write manifest under '" + dir + "'");
        os << manifest.dump(2) << "\n";
    }
    for (std::size_t k = 0; k < ds.trajectories.size(); ++k) {
        const Trajectory& tr = ds.trajectories[k];
        write_csv(traj_file(dir, k, "stimulus"), "v", tr.times, tr.v);
        write_csv(traj_file(dir, k, "response"), "y", tr.times, tr.y);
    }
}

TrajectoryDataset load_dataset(const std::string& dir) {
    const fs::path mfile = fs::path(dir) / "manifest.json";
    std::ifstream is(mfile);
    if (!is) throw DataError("no dataset manifest at '" + mfile.string() + "'");
    json manifest;
    try {
        is >> manifest;
    } catch (const json::exception& e) {
        throw DataError("manifest parse failure: " + std::string(e.what()));
    }
    TrajectoryDataset ds;
    try {
        ds.stim_dim = manifest.at("dims").at("stimulus").get<int>();
        ds.obs_dim = manifest.at("dims").at("observation").get<int>();
        ds.latent_dim = manifest.at("dims").value("latent", 0);
        ds.modality = modality_from_string(manifest.at("modality").get<std::string>());
        ds.bin_width = manifest.value("bin_width", 1.0);
        ds.pre_samples = manifest.value("pre_samples", 0);
        ds.dt = manifest.at("dt").get<double>();
        ds.n_samples = manifest.at("N").get<int>();
        ds.seed = manifest.value("seed", std::uint64_t{0});
        ds.generator = manifest.value("generator", json());
        const std::size_t K = manifest.at("K").get<std::size_t>();
        ds.trajectories.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            auto [st, sv] = read_csv(traj_file(dir, k, "stimulus"));
            auto [rt, rv] = read_csv(traj_file(dir, k, "response"));
            if (st.size() != rt.size()) {
                throw DataError("trajectory " + std::to_string(k) +
                                ": stimulus and response grids have different lengths");
            }
            for (std::size_t n = 0; n < st.size(); ++n) {
                if (st[n] != rt[n]) {
                    throw DataError("trajectory " + std::to_string(k) +
                                    ": stimulus and response time stamps disagree at row " +
                                    std::to_string(n));
                }
            }
            ds.trajectories[k] = Trajectory{std::move(st), std::move(sv), std::move(rv)};
        }
    } catch (const json::exception& e) {
        throw DataError("manifest field error: " + std::string(e.what()));
    }
    ds.validate();
    return ds;
}

} // namespace udekit
