#pragma once

#include <string>

#include "r2f/runtime.hpp"

namespace r2f {

/// Full run configuration: the training/runtime knobs plus model and data
/// sources. Parsed from flat `key=value` text with '#' comments; every key
/// has a default, unknown keys are rejected by name.
struct AppConfig {
  TrainingConfig train;

  std::string model_arch = "tiny-net";  // tiny-net | tiny-resnet | toy8
  std::string model_path;               // nonempty: load serialized model

  std::string data_images;  // IDX image file; empty -> synthetic data
  std::string data_labels;  // IDX label file
  int data_synth_n = 512;
  int data_classes = 10;
  uint64_t data_seed = 42;

  double select_rmax = 0.1;
  int select_n_eval = 200;
};

/// Parses config text. Unknown keys, malformed lines, and unparsable values
/// raise ConfigError naming the offender. `channel.profile` is applied
/// before any explicit channel.* overrides regardless of line order.
AppConfig parse_config(const std::string& text);

AppConfig load_config(const std::string& path);

/// Sets the per-run master seed: data order and fault streams.
void set_master_seed(AppConfig& cfg, uint64_t seed);

/// Data sources. Field data (data.seed) is what the deployed device trains
/// on; factory data (a decorrelated seed) is what clean pretraining uses,
/// so retraining sees samples pretraining never did; heldout data (a third
/// seed) measures accuracy. With IDX files all three are the loaded set.
Dataset field_data(const AppConfig& cfg, int hw);
Dataset factory_data(const AppConfig& cfg, int hw);
Dataset heldout_data(const AppConfig& cfg, int hw);

/// Canonical commented listing of every key with its default value.
std::string config_defaults_doc();

}  // namespace r2f
