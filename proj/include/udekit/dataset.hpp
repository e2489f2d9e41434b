#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "udekit/errors.hpp"

namespace udekit {

enum class Modality { Gaussian, Poisson };

Modality modality_from_string(const std::string& s);
const char* modality_name(Modality m);

// One recorded (stimulus, response) trajectory on a shared time grid.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> v; // N x d_v
    std::vector<std::vector<double>> y; // N x d_y
};

struct TrajectoryDataset {
    std::vector<Trajectory> trajectories;
    int stim_dim = 0;
    int obs_dim = 1;
    int latent_dim = 0; // generator metadata; 0 when unknown
    Modality modality = Modality::Gaussian;
    double bin_width = 1.0; // poisson bin width
    int pre_samples = 0;    // pre-task conditioning segment; 0 = unmarked
    double dt = 0.0;
    int n_samples = 0;
    std::uint64_t seed = 0;
    nlohmann::json generator; // echo of the generating configuration

    void validate() const;
};

// Layout on disk: <dir>/manifest.json plus per-trajectory
// traj_NNNN_stimulus.csv (t,v0,...) and traj_NNNN_response.csv (t,y0,...).
void save_dataset(const TrajectoryDataset& ds, const std::string& dir);
TrajectoryDataset load_dataset(const std::string& dir);

// CSV helpers shared across the library (17 significant digits).
void write_csv(const std::string& file, const std::string& prefix,
               const std::vector<double>& times,
               const std::vector<std::vector<double>>& rows);
std::pair<std::vector<double>, std::vector<std::vector<double>>> read_csv(const std::string& file);

std::string format_double(double v);

} // namespace udekit
