#pragma once

#include <string>

#include <json.hpp>

#include "udekit/inference.hpp"

namespace udekit {

// ---- checkpoints -------------------------------------------------------------
// Parameters serialize as flat arrays keyed by name; doubles round-trip
// value-exactly. The optimizer block (moments, step count, next epoch) makes
// a resumed run reproduce the continuing run bit for bit.

nlohmann::json model_to_json(LatentUdeModel& model, const AdamState* opt = nullptr,
                             int next_epoch = 0);
LatentUdeModel model_from_json(const nlohmann::json& j);

// True when the checkpoint carries optimizer state; fills `opt` and
// `next_epoch` if so.
bool optimizer_from_json(const nlohmann::json& j, AdamState& opt, int& next_epoch);

void save_model(LatentUdeModel& model, const std::string& file,
                const AdamState* opt = nullptr, int next_epoch = 0);
LatentUdeModel load_model(const std::string& file, nlohmann::json* raw = nullptr);

// ---- run configuration ---------------------------------------------------------
// Strict schema: unknown keys anywhere in the document are rejected.

struct RunConfig {
    nlohmann::json dataset;  // {"generator": {...}} and/or {"path": "..."}
    nlohmann::json model;    // model section (may be null for simulate-only)
    nlohmann::json train;    // train section (may be null)
    std::string output;      // output directory
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::string& file);

// The dataset directory a config points at: dataset.path if present, else
// <output>/dataset (the place `simulate` writes).
std::string dataset_dir(const RunConfig& cfg);

GeneratorSpec generator_from_config(const nlohmann::json& gen);

// Fresh model from the config's model section and the dataset's dimensions.
LatentUdeModel build_model(const nlohmann::json& model_cfg, int stim_dim, int obs_dim,
                           Modality modality, double bin_width);

TrainConfig train_config_from_json(const nlohmann::json& train_cfg);

// Shared drift-spec parser (model priors and ground-truth generators).
DriftSpec drift_from_config(const nlohmann::json& cfg, int latent_dim, int input_dim,
                            std::uint64_t init_seed);

} // namespace udekit
