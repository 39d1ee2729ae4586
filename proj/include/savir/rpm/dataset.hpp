#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "savir/rpm/generator.hpp"
#include "savir/rpm/raster.hpp"
#include "savir/rpm/types.hpp"

namespace savir::rpm {

inline constexpr std::uint16_t kDatasetVersion = 1;
inline constexpr char kDatasetMagic[4] = {'R', 'P', 'M', 'D'};

/// One split: symbolic puzzles with their rasters, index-aligned.
struct DatasetSplit {
  int image_size = 0;
  std::vector<PuzzleSymbolic> puzzles;
  std::vector<PuzzleRaster> rasters;

  std::size_t size() const { return puzzles.size(); }
};

struct Manifest {
  Layout layout = Layout::Center;
  DistractorMode distractor_mode = DistractorMode::IRaven;
  int image_size = 96;
  bool column_rules = false;
  std::map<std::string, std::size_t> counts;  // train / val / test
  std::uint64_t seed = 0;
  int format_version = kDatasetVersion;

  std::size_t total() const;
};

/// Text payload stored per puzzle.
std::string serialize_symbolic(const PuzzleSymbolic& p);
PuzzleSymbolic deserialize_symbolic(const std::string& text);

/// Binary split file (little-endian):
///   "RPMD" | u16 version | u32 puzzle_count | u16 image_size
///   per puzzle: 16*H*W bytes | u8 label | u32 symbolic_len | payload
void write_split(const std::filesystem::path& file, const DatasetSplit& split);
/// Throws FormatError with the byte offset of the first malformed field.
DatasetSplit read_split(const std::filesystem::path& file);

void write_manifest(const std::filesystem::path& dir, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& dir);

std::filesystem::path split_path(const std::filesystem::path& dir, const std::string& split);

/// Writes manifest.json plus one <split>.rpmd per non-empty split.
void write_dataset(const std::filesystem::path& dir, const Manifest& manifest,
                   const std::map<std::string, DatasetSplit>& splits);
DatasetSplit read_dataset(const std::filesystem::path& dir, const std::string& split);

/// Deterministic split seed derived from the global seed.
std::uint64_t split_seed(std::uint64_t seed, const std::string& split);

/// Everything needed to regenerate a dataset directory.
struct DatasetRecipe {
  GeneratorConfig generator;
  int image_size = 96;
  std::map<std::string, std::size_t> counts = {{"train", 5000}, {"val", 500}, {"test", 1000}};
  std::uint64_t seed = 0;
};

/// Generates every split of the recipe into `dir`, one split in memory at a
/// time, and returns the manifest written.
Manifest generate_dataset(const DatasetRecipe& recipe, const std::filesystem::path& dir);

/// Generates and rasterizes `count` puzzles.
DatasetSplit generate_split(const GeneratorConfig& config, int image_size, std::uint64_t seed, std::size_t count);

}  // namespace savir::rpm
