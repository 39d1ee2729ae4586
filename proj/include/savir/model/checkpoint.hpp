#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "savir/model/savirt.hpp"

namespace savir::model {

struct CheckpointMeta {
  ModelConfig model;
  std::string run_config_hash;
  int epoch = 0;
  double val_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::string dataset_layout;  // layout and distractor mode of the training data
  std::string dataset_mode;
};

/// Writes parameters to `path` and metadata to `path` + ".json".
void save_checkpoint(const std::filesystem::path& path, const SavirModel<float>& model, const CheckpointMeta& meta);

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Rebuilds the model recorded in the sidecar and fills its parameters.
/// Throws FormatError on a corrupt or mismatched parameter file.
SavirModel<float> load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace savir::model
