#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "savir/model/config.hpp"

namespace savir::train {

struct RunConfig {
  std::filesystem::path dataset;  // directory holding manifest.json and the splits
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool row_col_shuffle = true;
  bool choice_shuffle = true;
  std::uint64_t seed = 0;
  std::size_t train_limit = 0;  // use only the first n training puzzles; 0 keeps all
  model::ModelConfig model;

  void validate() const;

  /// Stable description of every field, one "key = value" per line.
  std::string describe() const;

  /// 64-bit FNV-1a of describe(), as 16 hex digits.
  std::string hash() const;
};

}  // namespace savir::train
