#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "savir/rpm/dataset.hpp"
#include "savir/train/evaluate.hpp"
#include "savir/train/run_config.hpp"
#include "savir/train/trainer.hpp"

namespace savir::train {

/// A dataset recipe plus the run trained on it. The run's dataset path and
/// image size are filled in by the runners.
struct Experiment {
  rpm::DatasetRecipe data;
  RunConfig run;
};

struct RunOutcome {
  std::filesystem::path checkpoint;
  int best_epoch = 0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
  bool reused = false;
};

struct AblationRow {
  std::string variant;
  int image_size = 0;
  int tokens_per_side = 0;
  bool use_columns = false;
  bool context_blind = false;
  RunOutcome outcome;
};

/// Generates the recipe into `dir` unless a manifest with identical settings
/// is already there.
rpm::Manifest ensure_dataset(const rpm::DatasetRecipe& recipe, const std::filesystem::path& dir);

/// Trains into `out` and evaluates the best checkpoint on the test split. A
/// finished run in `out` whose recorded config hash equals this run's is
/// reused instead of retrained.
RunOutcome train_and_test(const RunConfig& run, const std::filesystem::path& out, const ProgressFn& progress = {});

/// One run per image size with the same budget and seeds.
std::vector<AblationRow> ablate_receptive_field(const Experiment& base, const std::vector<int>& sizes,
                                                const std::filesystem::path& workdir, const ProgressFn& progress = {});

/// The context-blind variant on the base dataset.
std::vector<AblationRow> ablate_context_blind(const Experiment& base, const std::filesystem::path& workdir,
                                              const ProgressFn& progress = {});

/// use_columns off and on, same budget. Requires row-rule data.
std::vector<AblationRow> ablate_row_col(const Experiment& base, const std::filesystem::path& workdir,
                                        const ProgressFn& progress = {});

/// variant,image_size,tokens_per_side,use_columns,context_blind,best_epoch,val_accuracy,test_accuracy
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& file);

/// Directory name for a dataset recipe, e.g. "center_iraven_96_rows_s0".
std::string dataset_name(const rpm::DatasetRecipe& recipe);

}  // namespace savir::train
