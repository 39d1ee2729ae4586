#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "savir/rpm/dataset.hpp"
#include "savir/train/run_config.hpp"

namespace savir::cli {

/// Flat "section.key" settings read from an INI-style file:
///
///   seed = 3
///   [data]
///   layout = grid2x2
///
/// Every key has a default; unknown keys are errors.
class Settings {
 public:
  Settings();

  /// Applies a config file over the current values.
  void merge_file(const std::filesystem::path& file);
  void merge_text(const std::string& text, const std::string& origin);

  /// Applies one "section.key=value" override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;

  /// Resolved settings in file syntax, sections in fixed order.
  std::string to_ini() const;

 private:
  std::size_t index(const std::string& key) const;
  std::vector<std::pair<std::string, std::string>> entries_;
};

rpm::DatasetRecipe recipe_from(const Settings& s);
model::ModelConfig model_from(const Settings& s);
train::RunConfig run_from(const Settings& s);

}  // namespace savir::cli
