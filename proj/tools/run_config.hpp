#pragma once

// JSON run configuration shared by all subcommands.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "hubs/embedding.hpp"
#include "hubs/model.hpp"
#include "hubs/synthetic.hpp"
#include "hubs/training.hpp"

namespace hubs::cli {

struct GraphConfig {
  int n_days = 63;
  int semester_days = 126;
  std::int64_t window_seconds = 600;
  std::uint64_t seed = 0;  // null-model shuffles
};

// Default directories for commands whose flags are omitted.
struct PathsConfig {
  std::string data;
  std::string graph;
  std::string embeddings;
  std::string run;
};

HyperParams blank_model();

struct RunConfig {
  GenConfig generator;
  std::uint64_t generator_seed = 0;
  GraphConfig graph;
  EmbedConfig embedding;
  // Model section. Task, behavior types and data-derived sizes come from the
  // dataset; an empty hidden_sizes list or facet_dim 0 means the task default.
  HyperParams model = blank_model();
  // Training section; its seed also drives the train/validation split.
  TrainConfig training;
  int n_days = 63;
  double train_fraction = 0.9;
  Variant variant = Variant::Full;
  PathsConfig paths;

  // Model hyperparameters for a dataset with this manifest.
  HyperParams hyperparams_for(const DatasetManifest& manifest) const;
};

// Parses a configuration document. Absent keys keep their defaults; unknown
// sections or keys throw ContractError naming them.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Every key with its effective value.
nlohmann::json resolved_json(const RunConfig& config);

// Applies HUBS_SEED (when set) to every seed in the configuration.
void apply_seed_override(RunConfig& config);

}  // namespace hubs::cli
