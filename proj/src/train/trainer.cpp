#include "savir/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "savir/error.hpp"
#include "savir/model/checkpoint.hpp"
#include "savir/train/augment.hpp"
#include "savir/train/evaluate.hpp"

namespace savir::train {

void Adam::step(const std::vector<model::Param<float>*>& params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(model::Matrix<float>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(model::Matrix<float>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto step = static_cast<float>(lr_ * std::sqrt(1.0 - std::pow(beta2_, t_)) / (1.0 - std::pow(beta1_, t_)));
  const auto eps = static_cast<float>(eps_ * std::sqrt(1.0 - std::pow(beta2_, t_)));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& g = params[i]->grad;
    m_[i] = b1 * m_[i] + (1.0f - b1) * g;
    v_[i] = b2 * v_[i] + (1.0f - b2) * g.cwiseProduct(g);
    params[i]->value.array() -= step * m_[i].array() / (v_[i].array().sqrt() + eps);
  }
}

namespace {

class MetricsLog {
 public:
  explicit MetricsLog(const std::filesystem::path& file) {
    const bool fresh = !std::filesystem::exists(file) || std::filesystem::file_size(file) == 0;
    out_.open(file, std::ios::app);
    if (!out_) throw ConfigError("cannot write " + file.string());
    out_.precision(9);
    if (fresh) out_ << "epoch,split,metric,value\n";
  }

  void add(int epoch, const char* split, const char* metric, double value) {
    out_ << epoch << "," << split << "," << metric << "," << value << "\n";
    out_.flush();
  }

 private:
  std::ofstream out_;
};

double accuracy(const model::SavirModel<float>& net, const rpm::DatasetSplit& split) {
  if (split.size() == 0) return 0.0;
  std::size_t correct = 0;
  for (const auto& r : split.rasters) correct += predict(net.forward(r.pixels), r.label) == r.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace

TrainResult train(const RunConfig& run, const rpm::Manifest& manifest, const rpm::DatasetSplit& train_split,
                  const rpm::DatasetSplit& val_split, const std::filesystem::path& out, const ProgressFn& progress) {
  run.validate();
  if (train_split.image_size != run.model.image_size || val_split.image_size != run.model.image_size) {
    throw ConfigError("dataset image size " + std::to_string(train_split.image_size) + " does not match model image size " +
                      std::to_string(run.model.image_size));
  }
  if (train_split.size() == 0 && run.epochs > 0) throw ConfigError("training split is empty");
  std::filesystem::create_directories(out);

  model::SavirModel<float> net(run.model, mix_seed(run.seed, 1));
  Adam adam(run.learning_rate, run.adam_beta1, run.adam_beta2, run.adam_epsilon);
  Rng data_rng(mix_seed(run.seed, 2));
  Rng dropout_rng(mix_seed(run.seed, 3));
  const AugmentFlags flags{run.row_col_shuffle, run.choice_shuffle};
  const auto params = net.parameters();
  MetricsLog log(out / "metrics.csv");

  TrainResult result;
  result.checkpoint = out / "best.ckpt";
  model::CheckpointMeta meta{run.model, run.hash(), 0, 0.0, run.seed,
                             std::string(rpm::to_string(manifest.layout)), std::string(rpm::to_string(manifest.distractor_mode))};

  const std::size_t n = run.train_limit > 0 ? std::min(run.train_limit, train_split.size()) : train_split.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  model::ForwardTape<float> tape;

  for (int epoch = 0; epoch <= run.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochMetrics m;
    m.epoch = epoch;
    if (epoch > 0) {
      std::shuffle(order.begin(), order.end(), data_rng.engine());
      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(run.batch_size)) {
        const std::size_t end = std::min(n, begin + static_cast<std::size_t>(run.batch_size));
        const auto scale = 1.0f / static_cast<float>(end - begin);
        net.zero_grad();
        for (std::size_t i = begin; i < end; ++i) {
          rpm::PuzzleRaster sample = train_split.rasters[order[i]];
          apply(draw_augment(flags, manifest.column_rules, data_rng), sample);
          const auto scores = net.forward(sample.pixels, tape, &dropout_rng);
          const float loss = model::cross_entropy(scores, sample.label);
          if (!std::isfinite(loss)) {
            throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(adam.steps() + 1));
          }
          loss_sum += loss;
          correct += predict(scores, sample.label) == sample.label ? 1 : 0;
          auto grad = model::cross_entropy_grad(scores, sample.label);
          for (auto& g : grad) g *= scale;
          net.backward(tape, grad);
        }
        adam.step(params);
      }
      m.train_loss = loss_sum / static_cast<double>(n);
      m.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
      log.add(epoch, "train", "loss", m.train_loss);
      log.add(epoch, "train", "accuracy", m.train_accuracy);
    }
    m.val_accuracy = accuracy(net, val_split);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.add(epoch, "val", "accuracy", m.val_accuracy);
    log.add(epoch, "train", "seconds", m.seconds);
    if (epoch == 0 || m.val_accuracy > result.best_val_accuracy) {
      result.best_epoch = epoch;
      result.best_val_accuracy = m.val_accuracy;
      meta.epoch = epoch;
      meta.val_accuracy = m.val_accuracy;
      model::save_checkpoint(result.checkpoint, net, meta);
    }
    result.history.push_back(m);
    if (progress) progress(m);
  }
  return result;
}

TrainResult train(const RunConfig& run, const std::filesystem::path& out, const ProgressFn& progress) {
  const auto manifest = rpm::read_manifest(run.dataset);
  if (manifest.image_size != run.model.image_size) {
    throw ConfigError("dataset image size " + std::to_string(manifest.image_size) + " does not match model image size " +
                      std::to_string(run.model.image_size));
  }
  const auto train_split = rpm::read_dataset(run.dataset, "train");
  const auto val_split = rpm::read_dataset(run.dataset, "val");
  return train(run, manifest, train_split, val_split, out, progress);
}

int overfit_probe(model::SavirModel<float>& net, const rpm::DatasetSplit& puzzles, double learning_rate, int max_steps) {
  Adam adam(learning_rate, 0.9, 0.999, 1e-8);
  const auto params = net.parameters();
  model::ForwardTape<float> tape;
  const auto scale = 1.0f / static_cast<float>(puzzles.size());
  for (int step = 0; step <= max_steps; ++step) {
    if (accuracy(net, puzzles) == 1.0) return step;
    if (step == max_steps) break;
    net.zero_grad();
    for (const auto& r : puzzles.rasters) {
      auto grad = model::cross_entropy_grad(net.forward(r.pixels, tape), r.label);
      for (auto& g : grad) g *= scale;
      net.backward(tape, grad);
    }
    adam.step(params);
  }
  return -1;
}

}  // namespace savir::train
