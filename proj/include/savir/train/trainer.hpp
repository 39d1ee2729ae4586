#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "savir/model/savirt.hpp"
#include "savir/rpm/dataset.hpp"
#include "savir/train/run_config.hpp"

namespace savir::train {

/// Adam over a model's parameters.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<model::Param<float>*>& params);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<model::Matrix<float>> m_, v_;
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::filesystem::path checkpoint;  // best validation checkpoint
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  std::vector<EpochMetrics> history;
};

using ProgressFn = std::function<void(const EpochMetrics&)>;

/// Trains on `train` and selects by accuracy on `val`. Epoch 0 evaluates the
/// initial weights, so `epochs = 0` yields the initialization checkpoint.
/// Writes best.ckpt (+ sidecar) and appends to metrics.csv in `out`.
/// Throws DivergenceError on a non-finite loss.
TrainResult train(const RunConfig& run, const rpm::Manifest& manifest, const rpm::DatasetSplit& train_split,
                  const rpm::DatasetSplit& val_split, const std::filesystem::path& out, const ProgressFn& progress = {});

/// Reads the splits named in the run config's dataset directory and trains.
TrainResult train(const RunConfig& run, const std::filesystem::path& out, const ProgressFn& progress = {});

/// Plain training steps over a fixed list of puzzles without augmentation or
/// dropout, stopping once every puzzle is classified correctly. Returns the
/// number of steps taken, or -1 if `max_steps` ran out.
int overfit_probe(model::SavirModel<float>& model, const rpm::DatasetSplit& puzzles, double learning_rate, int max_steps);

}  // namespace savir::train
