// Acceptance run: one PASS/FAIL line per criterion. Trained runs live under
// the work directory (argv[1], default ./acceptance_work) and are reused
// when their recorded run-config hash matches.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "savir/model/checkpoint.hpp"
#include "savir/model/grad_check.hpp"
#include "savir/oracle/oracle.hpp"
#include "savir/rpm/dataset.hpp"
#include "savir/rpm/generator.hpp"
#include "savir/train/ablation.hpp"
#include "savir/train/evaluate.hpp"
#include "savir/train/trainer.hpp"

using namespace savir;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr std::size_t kSoundnessPuzzles = 1000;
constexpr double kSoundnessSeconds = 120.0;
constexpr double kGradTolerance = 1e-4;
constexpr int kGradSamples = 5;
constexpr int kGradMinProbes = 20;
constexpr double kGradSeconds = 60.0;
constexpr int kEquivariancePuzzles = 100;
constexpr float kEquivarianceTolerance = 1e-5f;
constexpr double kEquivarianceSeconds = 60.0;
constexpr double kLearningTarget = 0.85;
constexpr int kMaxEpochs = 30;
constexpr double kCpuBudgetSeconds = 4.0 * 3600.0;
constexpr double kBlindIRavenMax = 0.20;
constexpr double kBlindRavenMin = 0.40;
constexpr double kReceptiveGap = 0.10;
constexpr double kColumnDropMax = 0.08;
constexpr double kCrossModeSlack = 0.02;
constexpr int kOverfitPuzzles = 8;
constexpr int kOverfitSteps = 200;

// Desk-scale training setup shared by the trained criteria.
train::RunConfig desk_run() {
  train::RunConfig run;
  run.epochs = kMaxEpochs;
  run.batch_size = 32;
  run.learning_rate = 1e-4;
  run.seed = 1;
  run.model.image_size = 96;
  run.model.d_model = 64;
  run.model.heads = 3;
  run.model.depth = 1;
  run.model.backbone_channels = {8, 16, 32, 64};
  return run;
}

rpm::DatasetRecipe desk_data(rpm::Layout layout, rpm::DistractorMode mode, int image_size = 96) {
  rpm::DatasetRecipe r;
  r.generator.layout = layout;
  r.generator.mode = mode;
  r.image_size = image_size;
  r.counts = {{"train", 5000}, {"val", 500}, {"test", 1000}};
  r.seed = 2024;
  return r;
}

double seconds_since(clk::time_point start) { return std::chrono::duration<double>(clk::now() - start).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << std::fixed << v;
  return os.str();
}

struct Line {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Line> g_lines;

void report(int id, bool pass, const std::string& detail) {
  g_lines.push_back({id, pass, detail});
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << " | " << detail << std::endl;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

class Runs {
 public:
  explicit Runs(fs::path work) : work_(std::move(work)) {}

  fs::path dataset(const rpm::DatasetRecipe& r) {
    const auto dir = work_ / "data" / train::dataset_name(r);
    const auto start = clk::now();
    train::ensure_dataset(r, dir);
    log("dataset " + dir.filename().string() + " ready in " + fmt(seconds_since(start), 1) + " s");
    return dir;
  }

  struct Outcome {
    train::RunOutcome run;
    double seconds = 0.0;
    int epochs = 0;
  };

  Outcome train(const std::string& name, train::RunConfig run, const rpm::DatasetRecipe& data) {
    run.dataset = dataset(data);
    run.model.image_size = data.image_size;
    const auto start = clk::now();
    Outcome o;
    o.run = train::train_and_test(run, work_ / "runs" / name, [&](const train::EpochMetrics& m) {
      log(name + " epoch " + std::to_string(m.epoch) + " loss " + fmt(m.train_loss) + " train " + fmt(m.train_accuracy) +
          " val " + fmt(m.val_accuracy) + " (" + fmt(m.seconds, 1) + " s)");
    });
    o.seconds = o.run.reused ? recorded_seconds(work_ / "runs" / name) : seconds_since(start);
    o.epochs = run.epochs;
    log(name + (o.run.reused ? " reused" : " trained") + ": best epoch " + std::to_string(o.run.best_epoch) + " val " +
        fmt(o.run.val_accuracy) + " test " + fmt(o.run.test_accuracy) + ", " + fmt(o.seconds / 60.0, 1) + " min");
    return o;
  }

 private:
  // Training time of a finished run, summed from its metrics log.
  static double recorded_seconds(const fs::path& dir) {
    std::ifstream in(dir / "metrics.csv");
    double total = 0.0;
    for (std::string line; std::getline(in, line);) {
      if (line.find(",train,seconds,") != std::string::npos) total += std::stod(line.substr(line.rfind(',') + 1));
    }
    return total;
  }

  static void log(const std::string& msg) { std::cerr << "  " << msg << std::endl; }

  fs::path work_;
};

void criterion_1() {
  const auto start = clk::now();
  std::size_t valid = 0, ties = 0, total = 0;
  for (auto layout : {rpm::Layout::Center, rpm::Layout::Grid2x2}) {
    for (auto mode : {rpm::DistractorMode::Raven, rpm::DistractorMode::IRaven}) {
      rpm::GeneratorConfig g;
      g.layout = layout;
      g.mode = mode;
      for (const auto& p : rpm::sample_puzzles(g, 77, kSoundnessPuzzles)) {
        const auto sol = oracle::solve(p);
        ++total;
        ties += sol.tie ? 1 : 0;
        valid += !sol.tie && sol.predicted == p.correct_index ? 1 : 0;
      }
    }
  }
  const double secs = seconds_since(start);
  report(1, valid == total && ties == 0 && secs < kSoundnessSeconds,
         std::to_string(valid) + "/" + std::to_string(total) + " valid, " + std::to_string(ties) + " ties, " + fmt(secs, 1) +
             " s (limit " + fmt(kSoundnessSeconds, 0) + " s)");
}

void criterion_2() {
  const auto start = clk::now();
  model::ModelConfig c;
  c.image_size = 64;  // K = 2
  c.d_model = 16;
  c.heads = 2;
  c.depth = 1;
  c.dropout = 0.0;
  c.backbone_channels = {4, 6, 8, 8};
  double worst = 0.0;
  std::string worst_path;
  std::size_t probes = 0;
  std::set<std::string> tensors;
  for (int s = 0; s < kGradSamples; ++s) {
    model::SavirModel<double> net(c, 100 + static_cast<std::uint64_t>(s));
    const auto raster = rpm::rasterize(rpm::sample_puzzle({}, 500 + static_cast<std::uint64_t>(s)), c.image_size);
    const auto r = model::grad_check(net, raster.pixels, raster.label,
                                     {.epsilon = 1e-5, .min_probes = kGradMinProbes, .seed = static_cast<std::uint64_t>(s)});
    probes += r.probes.size();
    for (const auto& p : r.probes) tensors.insert(p.path.substr(0, p.path.find('[')));
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_path = r.worst_path;
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream detail;
  detail << "max relative error " << worst << " at " << worst_path << " over " << probes << " probes in " << tensors.size()
         << " tensors x " << kGradSamples << " samples, " << fmt(secs, 1) << " s";
  report(2, worst < kGradTolerance && probes >= static_cast<std::size_t>(kGradMinProbes * kGradSamples) && secs < kGradSeconds,
         detail.str());
}

void criterion_3() {
  const auto start = clk::now();
  const auto run = desk_run();
  const model::SavirModel<float> net(run.model, 9);
  Rng rng(31);
  float worst = 0.0f;
  const std::size_t plane = static_cast<std::size_t>(run.model.image_size) * run.model.image_size;
  for (int i = 0; i < kEquivariancePuzzles; ++i) {
    const auto raster = rpm::rasterize(rpm::sample_puzzle({}, 900 + static_cast<std::uint64_t>(i)), run.model.image_size);
    std::array<int, 8> perm{};
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<int, 8>(perm));
    auto permuted = raster.pixels;
    for (int j = 0; j < 8; ++j) {
      const auto src = raster.image(8 + perm[static_cast<std::size_t>(j)]);
      std::copy(src.begin(), src.end(), permuted.begin() + static_cast<std::ptrdiff_t>((8 + j) * plane));
    }
    const auto a = net.forward(raster.pixels);
    const auto b = net.forward(permuted);
    for (int j = 0; j < 8; ++j) {
      worst = std::max(worst, std::abs(b[static_cast<std::size_t>(j)] - a[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])]));
    }
  }
  const double secs = seconds_since(start);
  std::ostringstream detail;
  detail << "max |s_perm - perm(s)| = " << worst << " over " << kEquivariancePuzzles << " puzzles, " << fmt(secs, 1) << " s";
  report(3, worst <= kEquivarianceTolerance && secs < kEquivarianceSeconds, detail.str());
}

void criterion_9(const fs::path& work, const fs::path& checkpoint, const fs::path& dataset) {
  // accuracy equals the fraction of positive margins
  const auto rep = train::evaluate(checkpoint, dataset, "test");
  const auto positive = static_cast<std::size_t>(std::ranges::count_if(rep.margins, [](double m) { return m > 0.0; }));
  const bool identity = positive == rep.correct && rep.accuracy() == static_cast<double>(positive) / static_cast<double>(rep.samples);

  // byte-exact dataset round trip
  const auto split = rpm::generate_split({}, 96, 4242, 50);
  const auto a = work / "roundtrip_a.rpmd", b = work / "roundtrip_b.rpmd";
  rpm::write_split(a, split);
  rpm::write_split(b, rpm::read_split(a));
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
  const bool roundtrip = !sa.empty() && sa == sb;

  // overfit probe on the tiny config
  model::ModelConfig c;
  c.image_size = 64;
  c.d_model = 16;
  c.heads = 2;
  c.backbone_channels = {4, 6, 8, 8};
  model::SavirModel<float> net(c, 5);
  const int steps = train::overfit_probe(net, rpm::generate_split({}, 64, 4343, kOverfitPuzzles), 1e-3, kOverfitSteps);
  const bool overfit = steps >= 0 && steps <= kOverfitSteps;

  report(9, identity && roundtrip && overfit,
         "accuracy " + fmt(rep.accuracy()) + " vs margin>0 fraction " +
             fmt(static_cast<double>(positive) / static_cast<double>(rep.samples)) + (identity ? " (exact)" : " (MISMATCH)") +
             "; round trip " + (roundtrip ? "byte-exact" : "differs") + "; overfit probe " +
             (overfit ? "100% after " + std::to_string(steps) + " steps" : "did not reach 100% in " + std::to_string(kOverfitSteps) + " steps"));
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_work");
  std::set<int> only;
  for (int i = 2; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const auto wanted = [&](int id) { return only.empty() || only.contains(id); };
  fs::create_directories(work);
  Runs runs(work);

  if (wanted(1)) guarded(1, criterion_1);
  if (wanted(2)) guarded(2, criterion_2);
  if (wanted(3)) guarded(3, criterion_3);

  const auto center_iraven = desk_data(rpm::Layout::Center, rpm::DistractorMode::IRaven);
  const auto center_raven = desk_data(rpm::Layout::Center, rpm::DistractorMode::Raven);
  std::optional<Runs::Outcome> base;
  const auto need_base = [&] {
    if (!base) base = runs.train("center_iraven", desk_run(), center_iraven);
    return *base;
  };

  if (wanted(4)) {
    guarded(4, [&] {
      const auto o = need_base();
      report(4, o.run.test_accuracy >= kLearningTarget && o.epochs <= kMaxEpochs && o.seconds <= kCpuBudgetSeconds,
             "test accuracy " + fmt(o.run.test_accuracy) + " (target " + fmt(kLearningTarget, 2) + ") after " +
                 std::to_string(o.epochs) + " epochs, best epoch " + std::to_string(o.run.best_epoch) + ", " +
                 fmt(o.seconds / 60.0, 1) + " min");
    });
  }

  if (wanted(5)) {
    guarded(5, [&] {
      auto blind = desk_run();
      blind.model.context_blind = true;
      const auto on_iraven = runs.train("blind_center_iraven", blind, center_iraven);
      const auto on_raven = runs.train("blind_center_raven", blind, center_raven);
      const auto full = need_base();
      const double gap = full.run.test_accuracy - on_iraven.run.test_accuracy;
      report(5, on_iraven.run.test_accuracy <= kBlindIRavenMax && on_raven.run.test_accuracy >= kBlindRavenMin,
             "context-blind test accuracy IRAVEN " + fmt(on_iraven.run.test_accuracy) + " (max " + fmt(kBlindIRavenMax, 2) +
                 "), RAVEN " + fmt(on_raven.run.test_accuracy) + " (min " + fmt(kBlindRavenMin, 2) + "); full model leads by " +
                 fmt(gap) + " on IRAVEN");
    });
  }

  if (wanted(6)) {
    guarded(6, [&] {
      const auto large = runs.train("grid_iraven_96", desk_run(), desk_data(rpm::Layout::Grid2x2, rpm::DistractorMode::IRaven, 96));
      const auto small = runs.train("grid_iraven_32", desk_run(), desk_data(rpm::Layout::Grid2x2, rpm::DistractorMode::IRaven, 32));
      const double gap = large.run.test_accuracy - small.run.test_accuracy;
      report(6, gap >= kReceptiveGap,
             "Grid2x2 IRAVEN test accuracy image 96 (K=3) " + fmt(large.run.test_accuracy) + " vs image 32 (K=1) " +
                 fmt(small.run.test_accuracy) + ", gap " + fmt(gap) + " (min " + fmt(kReceptiveGap, 2) + ")");
    });
  }

  if (wanted(7)) {
    guarded(7, [&] {
      auto cols = desk_run();
      cols.model.use_columns = true;
      const auto with_cols = runs.train("center_iraven_columns", cols, center_iraven);
      const auto rows_only = need_base();
      const double drop = rows_only.run.test_accuracy - with_cols.run.test_accuracy;
      report(7, drop <= kColumnDropMax,
             "test accuracy rows only " + fmt(rows_only.run.test_accuracy) + ", rows and columns " +
                 fmt(with_cols.run.test_accuracy) + ", drop " + fmt(drop) + " (max " + fmt(kColumnDropMax, 2) + ")");
    });
  }

  if (wanted(8)) {
    guarded(8, [&] {
      const auto raven = runs.train("center_raven", desk_run(), center_raven);
      const auto iraven_dir = runs.dataset(center_iraven);
      const auto cross = train::cross_eval(raven.run.checkpoint, iraven_dir);
      const double on_iraven = cross.accuracy();
      report(8, on_iraven >= raven.run.test_accuracy - kCrossModeSlack && cross.warnings.empty(),
             "RAVEN-trained model: RAVEN test " + fmt(raven.run.test_accuracy) + ", IRAVEN test " + fmt(on_iraven) +
                 " (must be >= RAVEN - " + fmt(kCrossModeSlack, 2) + ")" +
                 (cross.warnings.empty() ? "" : "; warning: " + cross.warnings.front()));
    });
  }

  if (wanted(9)) {
    guarded(9, [&] {
      const auto o = need_base();
      criterion_9(work, o.run.checkpoint, runs.dataset(center_iraven));
    });
  }

  const bool all = std::ranges::all_of(g_lines, [](const Line& l) { return l.pass; });
  std::cout << (all ? "all criteria passed" : "some criteria failed") << std::endl;
  return all ? 0 : 1;
}
