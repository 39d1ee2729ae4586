#include "savir/train/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "savir/error.hpp"
#include "savir/model/checkpoint.hpp"
#include "savir/rpm/rules.hpp"

namespace savir::train {

namespace {

std::ofstream open_csv(const std::filesystem::path& file, const char* header) {
  std::ofstream out(file);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << header << "\n";
  return out;
}

std::string join_kinds(const std::vector<rpm::AttrKind>& kinds) {
  std::string s;
  for (auto k : kinds) {
    if (!s.empty()) s += ";";
    s += rpm::to_string(k);
  }
  return s;
}

}  // namespace

int predict(const model::Scores<float>& scores, int label) {
  int best = -1;
  for (int a = 0; a < model::kChoices; ++a) {
    const float s = scores[static_cast<std::size_t>(a)];
    if (best < 0 || s > scores[static_cast<std::size_t>(best)] || (s == scores[static_cast<std::size_t>(best)] && best == label)) {
      best = a;
    }
  }
  return best;
}

EvalReport evaluate(const model::SavirModel<float>& net, const rpm::DatasetSplit& split, rpm::Layout layout) {
  if (split.image_size != net.config().image_size) {
    throw ConfigError("dataset image size " + std::to_string(split.image_size) + " does not match model image size " +
                      std::to_string(net.config().image_size));
  }
  return evaluate([&](std::size_t i) { return net.forward(split.rasters[i].pixels); }, split, layout);
}

EvalReport evaluate(const ScoreFn& scorer, const rpm::DatasetSplit& split, rpm::Layout layout) {
  EvalReport r;
  for (auto rule : rpm::kAllRuleKinds) {
    for (auto attr : rpm::kAllAttrKinds) r.cells[{rule, attr}] = {};
  }
  const std::string layout_name(rpm::to_string(layout));
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto& raster = split.rasters[i];
    const auto& puzzle = split.puzzles[i];
    const auto scores = scorer(i);
    const int label = raster.label;
    const int predicted = predict(scores, label);
    const bool ok = predicted == label;
    ++r.samples;
    r.correct += ok ? 1 : 0;
    r.labels.push_back(label);
    r.predictions.push_back(predicted);
    r.margins.push_back(static_cast<double>(model::score_margin(scores, label)));
    auto& lay = r.per_layout[std::string(rpm::to_string(puzzle.layout))];
    ++lay.total;
    lay.correct += ok ? 1 : 0;
    for (const auto& rule : puzzle.rules) {
      auto& cell = r.cells[{rule.rule, rule.attribute}];
      ++cell.total;
      cell.correct += ok ? 1 : 0;
    }
    if (!ok) {
      Misclassification m{i, predicted, label,
                          rpm::differing_attributes(puzzle.choices[static_cast<std::size_t>(predicted)],
                                                    puzzle.choices[static_cast<std::size_t>(label)])};
      ++r.difference_histogram[m.differing.size()];
      r.misclassified.push_back(std::move(m));
    }
  }
  if (r.per_layout.empty()) r.per_layout[layout_name] = {};
  return r;
}

EvalReport evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset, const std::string& split) {
  const auto net = model::load_checkpoint(checkpoint);
  const auto manifest = rpm::read_manifest(dataset);
  if (manifest.image_size != net.config().image_size) {
    throw ConfigError("dataset image size " + std::to_string(manifest.image_size) + " does not match checkpoint image size " +
                      std::to_string(net.config().image_size));
  }
  return evaluate(net, rpm::read_dataset(dataset, split), manifest.layout);
}

EvalReport cross_eval(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset, const std::string& split) {
  const auto meta = model::read_checkpoint_meta(checkpoint);
  const auto manifest = rpm::read_manifest(dataset);
  EvalReport r = evaluate(checkpoint, dataset, split);
  const std::string mode(rpm::to_string(manifest.distractor_mode));
  const std::string layout(rpm::to_string(manifest.layout));
  if (meta.dataset_mode.empty()) {
    r.warnings.push_back("checkpoint does not record its training distractor mode");
  } else if (meta.dataset_mode == mode) {
    r.warnings.push_back("dataset distractor mode " + mode + " equals the training mode");
  }
  if (!meta.dataset_layout.empty() && meta.dataset_layout != layout) {
    r.warnings.push_back("dataset layout " + layout + " differs from training layout " + meta.dataset_layout);
  }
  return r;
}

std::string_view to_string(MarginRegime r) {
  switch (r) {
    case MarginRegime::ConfidentCorrect: return "confident_correct";
    case MarginRegime::UncertainCorrect: return "uncertain_correct";
    case MarginRegime::UncertainWrong: return "uncertain_wrong";
    case MarginRegime::ConfidentWrong: return "confident_wrong";
  }
  return "?";
}

MarginRegime classify_margin(double margin, double threshold) {
  const bool uncertain = std::abs(margin) < threshold;
  if (margin > 0.0) return uncertain ? MarginRegime::UncertainCorrect : MarginRegime::ConfidentCorrect;
  return uncertain ? MarginRegime::UncertainWrong : MarginRegime::ConfidentWrong;
}

MarginSummary summarize_margins(const std::vector<double>& margins, double threshold) {
  MarginSummary s;
  for (double m : margins) {
    ++s.regimes[static_cast<std::size_t>(classify_margin(m, threshold))];
    s.positive += m > 0.0 ? 1 : 0;
  }
  return s;
}

void write_report(const EvalReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_csv(dir / "heatmap.csv", "rule,attribute,correct,total");
    for (const auto& [key, cell] : r.cells) {
      out << rpm::to_string(key.first) << "," << rpm::to_string(key.second) << "," << cell.correct << "," << cell.total << "\n";
    }
  }
  {
    auto out = open_csv(dir / "layouts.csv", "layout,correct,total");
    for (const auto& [name, cell] : r.per_layout) out << name << "," << cell.correct << "," << cell.total << "\n";
  }
  {
    auto out = open_csv(dir / "misclassified.csv", "sample,label,predicted,differences,attributes");
    for (const auto& m : r.misclassified) {
      out << m.sample << "," << m.label << "," << m.predicted << "," << m.differing.size() << "," << join_kinds(m.differing) << "\n";
    }
  }
  {
    auto out = open_csv(dir / "difference_histogram.csv", "differences,count");
    for (const auto& [d, n] : r.difference_histogram) out << d << "," << n << "\n";
  }
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  j["correct"] = r.correct;
  j["accuracy"] = r.accuracy();
  for (const auto& [name, cell] : r.per_layout) j["per_layout"][name] = cell.accuracy();
  j["warnings"] = r.warnings;
  std::ofstream out(dir / "report.json");
  out << j.dump(2) << "\n";
}

void write_margin_analysis(const EvalReport& r, const std::filesystem::path& dir, int bins, double threshold) {
  if (bins < 1) throw ConfigError("margin histogram needs at least one bin");
  std::filesystem::create_directories(dir);
  {
    auto out = open_csv(dir / "margins.csv", "sample,label,predicted,margin,regime");
    out.precision(9);
    for (std::size_t i = 0; i < r.margins.size(); ++i) {
      out << i << "," << r.labels[i] << "," << r.predictions[i] << "," << r.margins[i] << ","
          << to_string(classify_margin(r.margins[i], threshold)) << "\n";
    }
  }
  std::vector<double> sorted = r.margins;
  std::ranges::sort(sorted);
  {
    auto out = open_csv(dir / "margin_histogram.csv", "bin_left,bin_right,count");
    out.precision(9);
    if (!sorted.empty()) {
      const double lo = sorted.front();
      const double hi = sorted.back() > lo ? sorted.back() : lo + 1.0;
      const double width = (hi - lo) / bins;
      std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
      for (double m : sorted) {
        const auto b = std::min(static_cast<std::size_t>((m - lo) / width), counts.size() - 1);
        ++counts[b];
      }
      for (int b = 0; b < bins; ++b) {
        out << lo + b * width << "," << lo + (b + 1) * width << "," << counts[static_cast<std::size_t>(b)] << "\n";
      }
    }
  }
  {
    auto out = open_csv(dir / "margin_cdf.csv", "margin,fraction");
    out.precision(9);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
      out << sorted[i] << "," << static_cast<double>(i + 1) / static_cast<double>(sorted.size()) << "\n";
    }
  }
  const auto summary = summarize_margins(r.margins, threshold);
  auto out = open_csv(dir / "margin_regimes.csv", "regime,count");
  for (int k = 0; k < 4; ++k) out << to_string(static_cast<MarginRegime>(k)) << "," << summary.regimes[static_cast<std::size_t>(k)] << "\n";
}

}  // namespace savir::train
