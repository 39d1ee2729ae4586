#include "savir/train/ablation.hpp"

#include <fstream>
#include <json.hpp>

#include "savir/error.hpp"
#include "savir/model/checkpoint.hpp"

namespace savir::train {

namespace {

constexpr const char* kDoneFile = "done.json";

bool same_settings(const rpm::Manifest& m, const rpm::DatasetRecipe& r) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [name, n] : r.counts) {
    if (n > 0) counts[name] = n;
  }
  return m.layout == r.generator.layout && m.distractor_mode == r.generator.mode && m.image_size == r.image_size &&
         m.column_rules == r.generator.column_rules && m.seed == r.seed && m.counts == counts;
}

AblationRow row(const std::string& variant, const RunConfig& run, RunOutcome outcome) {
  return {variant, run.model.image_size, run.model.tokens_per_side(), run.model.use_columns, run.model.context_blind,
          std::move(outcome)};
}

}  // namespace

std::string dataset_name(const rpm::DatasetRecipe& r) {
  return std::string(rpm::to_string(r.generator.layout)) + "_" + std::string(rpm::to_string(r.generator.mode)) + "_" +
         std::to_string(r.image_size) + (r.generator.column_rules ? "_cols" : "_rows") + "_s" + std::to_string(r.seed);
}

rpm::Manifest ensure_dataset(const rpm::DatasetRecipe& recipe, const std::filesystem::path& dir) {
  if (std::filesystem::exists(dir / "manifest.json")) {
    const auto m = rpm::read_manifest(dir);
    bool complete = same_settings(m, recipe);
    for (const auto& [name, n] : m.counts) complete = complete && std::filesystem::exists(rpm::split_path(dir, name));
    if (complete) return m;
    std::filesystem::remove_all(dir);
  }
  return rpm::generate_dataset(recipe, dir);
}

RunOutcome train_and_test(const RunConfig& run, const std::filesystem::path& out, const ProgressFn& progress) {
  RunOutcome outcome;
  const auto done = out / kDoneFile;
  if (std::filesystem::exists(done)) {
    std::ifstream in(done);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded() && j.value("run_config_hash", "") == run.hash() && std::filesystem::exists(out / "best.ckpt")) {
      outcome.checkpoint = out / "best.ckpt";
      outcome.best_epoch = j.value("best_epoch", 0);
      outcome.val_accuracy = j.value("val_accuracy", 0.0);
      outcome.reused = true;
    }
  }
  if (!outcome.reused) {
    std::filesystem::remove_all(out);
    const auto result = train(run, out, progress);
    outcome.checkpoint = result.checkpoint;
    outcome.best_epoch = result.best_epoch;
    outcome.val_accuracy = result.best_val_accuracy;
    nlohmann::ordered_json j;
    j["run_config_hash"] = run.hash();
    j["best_epoch"] = result.best_epoch;
    j["val_accuracy"] = result.best_val_accuracy;
    std::ofstream(done) << j.dump(2) << "\n";
    std::ofstream(out / "run_config.txt") << run.describe();
  }
  outcome.test_accuracy = evaluate(outcome.checkpoint, run.dataset, "test").accuracy();
  return outcome;
}

std::vector<AblationRow> ablate_receptive_field(const Experiment& base, const std::vector<int>& sizes,
                                                const std::filesystem::path& workdir, const ProgressFn& progress) {
  std::vector<AblationRow> rows;
  for (int size : sizes) {
    if (size % model::kPatchSize != 0 || size < 32 || size > 128) {
      throw ConfigError("receptive field sizes must be among 32, 64, 96, 128; got " + std::to_string(size));
    }
    rpm::DatasetRecipe recipe = base.data;
    recipe.image_size = size;
    RunConfig run = base.run;
    run.model.image_size = size;
    run.dataset = workdir / "data" / dataset_name(recipe);
    ensure_dataset(recipe, run.dataset);
    rows.push_back(row("image_" + std::to_string(size), run, train_and_test(run, workdir / "runs" / ("image_" + std::to_string(size)), progress)));
  }
  return rows;
}

std::vector<AblationRow> ablate_context_blind(const Experiment& base, const std::filesystem::path& workdir,
                                              const ProgressFn& progress) {
  RunConfig run = base.run;
  run.model.image_size = base.data.image_size;
  run.model.context_blind = true;
  run.dataset = workdir / "data" / dataset_name(base.data);
  ensure_dataset(base.data, run.dataset);
  const std::string name = "context_blind_" + std::string(rpm::to_string(base.data.generator.mode));
  return {row(name, run, train_and_test(run, workdir / "runs" / name, progress))};
}

std::vector<AblationRow> ablate_row_col(const Experiment& base, const std::filesystem::path& workdir, const ProgressFn& progress) {
  if (base.data.generator.column_rules) throw ConfigError("row/column ablation needs row-rule data");
  std::vector<AblationRow> rows;
  for (bool columns : {false, true}) {
    RunConfig run = base.run;
    run.model.image_size = base.data.image_size;
    run.model.use_columns = columns;
    run.dataset = workdir / "data" / dataset_name(base.data);
    ensure_dataset(base.data, run.dataset);
    const std::string name = columns ? "rows_and_columns" : "rows_only";
    rows.push_back(row(name, run, train_and_test(run, workdir / "runs" / name, progress)));
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& file) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.precision(6);
  out << "variant,image_size,tokens_per_side,use_columns,context_blind,best_epoch,val_accuracy,test_accuracy\n";
  for (const auto& r : rows) {
    out << r.variant << "," << r.image_size << "," << r.tokens_per_side << "," << r.use_columns << "," << r.context_blind << ","
        << r.outcome.best_epoch << "," << r.outcome.val_accuracy << "," << r.outcome.test_accuracy << "\n";
  }
}

}  // namespace savir::train
