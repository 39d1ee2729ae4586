#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "savir/model/savirt.hpp"
#include "savir/rpm/dataset.hpp"

namespace savir::train {

struct CellStat {
  std::size_t correct = 0;
  std::size_t total = 0;

  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// Symbolic comparison of a wrongly chosen panel with the answer.
struct Misclassification {
  std::size_t sample = 0;
  int predicted = 0;
  int label = 0;
  std::vector<rpm::AttrKind> differing;
};

struct EvalReport {
  std::size_t samples = 0;
  std::size_t correct = 0;
  std::map<std::string, CellStat> per_layout;
  // rule x attribute, every pair listed; unsupported pairs stay at total 0
  std::map<std::pair<rpm::RuleKind, rpm::AttrKind>, CellStat> cells;
  std::vector<int> labels;
  std::vector<int> predictions;
  std::vector<double> margins;  // score of the answer minus the best other score
  std::vector<Misclassification> misclassified;
  std::map<std::size_t, std::size_t> difference_histogram;  // #differing attributes -> count
  std::vector<std::string> warnings;

  double accuracy() const { return samples == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(samples); }
};

/// argmax of the scores; ties that include the label resolve to the lowest
/// other tied index, so a prediction is correct exactly when the margin is
/// positive.
int predict(const model::Scores<float>& scores, int label);

/// Scores of sample i of the split being evaluated.
using ScoreFn = std::function<model::Scores<float>(std::size_t)>;

EvalReport evaluate(const ScoreFn& scorer, const rpm::DatasetSplit& split, rpm::Layout layout);
EvalReport evaluate(const model::SavirModel<float>& model, const rpm::DatasetSplit& split, rpm::Layout layout);

/// Loads the checkpoint, checks image sizes, and evaluates one split of the
/// dataset directory.
EvalReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset, const std::string& split);

/// Same as evaluate, plus warnings when the dataset mode equals the mode the
/// checkpoint was trained on or the layouts differ.
EvalReport cross_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                      const std::string& split = "test");

enum class MarginRegime { ConfidentCorrect, UncertainCorrect, UncertainWrong, ConfidentWrong };

std::string_view to_string(MarginRegime r);

/// |margin| below `threshold` counts as uncertain; margin > 0 is correct.
MarginRegime classify_margin(double margin, double threshold);

struct MarginSummary {
  std::array<std::size_t, 4> regimes{};
  std::size_t positive = 0;
};

MarginSummary summarize_margins(const std::vector<double>& margins, double threshold);

/// Writes report.json, heatmap.csv, layouts.csv, misclassified.csv and
/// difference_histogram.csv into `dir`.
void write_report(const EvalReport& report, const std::filesystem::path& dir);

/// Writes margins.csv (per sample), margin_histogram.csv (bin_left,
/// bin_right, count) and margin_cdf.csv (margin, fraction) into `dir`.
void write_margin_analysis(const EvalReport& report, const std::filesystem::path& dir, int bins, double threshold);

}  // namespace savir::train
