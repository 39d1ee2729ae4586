#include "savir/cli/app.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>

#include "savir/cli/settings.hpp"
#include "savir/error.hpp"
#include "savir/oracle/oracle.hpp"
#include "savir/train/ablation.hpp"
#include "savir/train/evaluate.hpp"
#include "savir/train/trainer.hpp"

namespace savir::cli {

namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "INI-style config file");
  cmd->add_option("--set", c.sets, "override, section.key=value (repeatable)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "global seed");
}

Settings resolve(const Common& c) {
  Settings s;
  if (!c.config.empty()) s.merge_file(c.config);
  for (const auto& a : c.sets) s.set(a);
  if (c.seed) s.set("seed", std::to_string(*c.seed));
  return s;
}

fs::path require_out(const Common& c, const Settings& s) {
  if (c.out.empty()) throw ConfigError("--out is required");
  fs::create_directories(c.out);
  std::ofstream(fs::path(c.out) / "config.ini") << s.to_ini();
  return c.out;
}

fs::path existing_dir(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is not set");
  if (!fs::exists(path)) throw NotFoundError(std::string(what) + " not found: " + path);
  return path;
}

fs::path existing_checkpoint(const std::string& path) {
  if (path.empty()) throw ConfigError("eval.checkpoint is not set");
  if (!fs::exists(path)) throw NotFoundError("checkpoint not found: " + path);
  return path;
}

std::string percent(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * x << "%";
  return os.str();
}

void print_progress(std::ostream& out, const train::EpochMetrics& m) {
  out << "epoch " << m.epoch;
  if (m.epoch > 0) out << " loss " << std::setprecision(4) << m.train_loss << " train " << percent(m.train_accuracy);
  out << " val " << percent(m.val_accuracy) << " (" << std::setprecision(3) << m.seconds << " s)\n" << std::flush;
}

int cmd_gen(const Common& c, std::ostream& out) {
  const Settings s = resolve(c);
  const auto recipe = recipe_from(s);
  const auto dir = require_out(c, s);
  const auto manifest = rpm::generate_dataset(recipe, dir);
  out << "wrote " << manifest.total() << " puzzles (" << rpm::to_string(manifest.layout) << ", "
      << rpm::to_string(manifest.distractor_mode) << ", " << manifest.image_size << "px) to " << dir.string() << "\n";
  return kOk;
}

int cmd_validate(const Common& c, const std::string& positional, std::ostream& out) {
  const Settings s = resolve(c);
  const auto dir = existing_dir(positional.empty() ? s.get("eval.dataset") : positional, "dataset");
  const auto manifest = rpm::read_manifest(dir);
  std::size_t total = 0, agree = 0, ties = 0;
  for (const auto& [name, count] : manifest.counts) {
    const auto split = rpm::read_dataset(dir, name);
    std::size_t split_agree = 0, split_ties = 0;
    for (std::size_t i = 0; i < split.size(); ++i) {
      const auto sol = oracle::solve(split.puzzles[i]);
      split_ties += sol.tie ? 1 : 0;
      split_agree += !sol.tie && sol.predicted == split.rasters[i].label ? 1 : 0;
    }
    out << "split " << name << ": " << split_agree << "/" << split.size() << " agree, ties " << split_ties << "\n";
    total += split.size();
    agree += split_agree;
    ties += split_ties;
  }
  out << "agreement " << percent(total == 0 ? 1.0 : static_cast<double>(agree) / static_cast<double>(total)) << " ties " << ties
      << "\n";
  return agree == total ? kOk : kValidationFailed;
}

int cmd_train(const Common& c, std::ostream& out) {
  const Settings s = resolve(c);
  train::RunConfig run = run_from(s);
  existing_dir(run.dataset.string(), "train.dataset");
  const auto dir = require_out(c, s);
  const auto result = train::train(run, dir, [&](const train::EpochMetrics& m) { print_progress(out, m); });
  out << "best epoch " << result.best_epoch << " val " << percent(result.best_val_accuracy) << " -> " << result.checkpoint.string()
      << "\n";
  if (fs::exists(rpm::split_path(run.dataset, "test"))) {
    const auto report = train::evaluate(result.checkpoint, run.dataset, "test");
    train::write_report(report, dir / "eval");
    out << "test accuracy " << percent(report.accuracy()) << " over " << report.samples << " puzzles\n";
  }
  return kOk;
}

train::EvalReport run_eval(const Settings& s) {
  const auto checkpoint = existing_checkpoint(s.get("eval.checkpoint"));
  const auto dataset = existing_dir(s.get("eval.dataset"), "eval.dataset");
  const auto& split = s.get("eval.split");
  return s.get_bool("eval.cross_mode") ? train::cross_eval(checkpoint, dataset, split) : train::evaluate(checkpoint, dataset, split);
}

void print_report(const train::EvalReport& r, std::ostream& out) {
  out << "accuracy " << percent(r.accuracy()) << " (" << r.correct << "/" << r.samples << ")\n";
  for (const auto& [name, cell] : r.per_layout) out << "layout " << name << " " << percent(cell.accuracy()) << "\n";
  for (const auto& w : r.warnings) out << "warning: " << w << "\n";
}

int cmd_eval(const Common& c, std::ostream& out) {
  const Settings s = resolve(c);
  const auto report = run_eval(s);
  const auto dir = require_out(c, s);
  train::write_report(report, dir);
  print_report(report, out);
  return kOk;
}

int cmd_analyze(const Common& c, std::ostream& out) {
  const Settings s = resolve(c);
  const auto report = run_eval(s);
  const auto dir = require_out(c, s);
  const double threshold = s.get_double("eval.margin_threshold");
  train::write_report(report, dir);
  train::write_margin_analysis(report, dir, s.get_int("eval.margin_bins"), threshold);
  print_report(report, out);
  const auto summary = train::summarize_margins(report.margins, threshold);
  for (int k = 0; k < 4; ++k) {
    out << train::to_string(static_cast<train::MarginRegime>(k)) << " " << summary.regimes[static_cast<std::size_t>(k)] << "\n";
  }
  return kOk;
}

int cmd_ablate(const Common& c, std::ostream& out) {
  const Settings s = resolve(c);
  const train::Experiment base{recipe_from(s), run_from(s)};
  const auto name = s.get("ablate.name");
  if (name != "receptive_field" && name != "context_blind" && name != "row_col") {
    throw ConfigError("config key ablate.name: expected receptive_field, context_blind or row_col, got '" + name + "'");
  }
  const auto dir = require_out(c, s);
  const auto progress = [&](const train::EpochMetrics& m) { print_progress(out, m); };
  std::vector<train::AblationRow> rows;
  if (name == "receptive_field") rows = train::ablate_receptive_field(base, s.get_int_list("ablate.sizes"), dir, progress);
  if (name == "context_blind") rows = train::ablate_context_blind(base, dir, progress);
  if (name == "row_col") rows = train::ablate_row_col(base, dir, progress);
  train::write_ablation_csv(rows, dir / "ablation.csv");
  for (const auto& r : rows) out << r.variant << " test " << percent(r.outcome.test_accuracy) << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Raven-style puzzle generation, reasoning model training and analysis", "savir"};
  app.require_subcommand(1);
  Common gen, validate, train_c, eval_c, analyze, ablate;
  std::string validate_dataset;
  auto* gen_cmd = app.add_subcommand("gen", "generate a dataset directory");
  auto* validate_cmd = app.add_subcommand("validate", "check a dataset against the symbolic solver");
  auto* train_cmd = app.add_subcommand("train", "train a model");
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  auto* analyze_cmd = app.add_subcommand("analyze", "evaluation plus score-margin analysis");
  auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation: receptive_field, context_blind or row_col");
  add_common(gen_cmd, gen);
  add_common(validate_cmd, validate);
  validate_cmd->add_option("dataset", validate_dataset, "dataset directory");
  add_common(train_cmd, train_c);
  add_common(eval_cmd, eval_c);
  add_common(analyze_cmd, analyze);
  add_common(ablate_cmd, ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, out);
    if (validate_cmd->parsed()) return cmd_validate(validate, validate_dataset, out);
    if (train_cmd->parsed()) return cmd_train(train_c, out);
    if (eval_cmd->parsed()) return cmd_eval(eval_c, out);
    if (analyze_cmd->parsed()) return cmd_analyze(analyze, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const NotFoundError& e) {
    err << "not found: " << e.what() << "\n";
    return kNotFound;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kBadFormat;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const GenerationError& e) {
    err << "generation failed: " << e.what() << "\n";
    return kGenerationFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInternal;
  }
  return kUsage;
}

}  // namespace savir::cli
