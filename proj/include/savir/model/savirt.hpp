#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "savir/model/config.hpp"
#include "savir/model/layers.hpp"
#include "savir/rng.hpp"

namespace savir::model {

inline constexpr int kChoices = 8;
inline constexpr int kPanels = 16;

template <typename T>
using Scores = std::array<T, kChoices>;

template <typename T>
struct BackboneTape {
  std::vector<Matrix<T>> cols;  // im2col buffer per stage
  std::vector<Matrix<T>> pre;   // pre-activation per stage
  std::vector<Matrix<T>> post;  // post-activation per stage
  int images = 0;
};

template <typename T>
struct TransformerLayerTape {
  Matrix<T> input;
  LayerNormCache<T> ln1;
  Matrix<T> normed1;
  Matrix<T> qkv;
  std::vector<Matrix<T>> attention;  // per (group, head): softmax weights
  Matrix<T> mixed;                   // concatenated head outputs
  Matrix<T> after_attention;
  LayerNormCache<T> ln2;
  Matrix<T> normed2;
  Matrix<T> hidden_pre;
  Matrix<T> hidden;
};

template <typename T>
struct MlpTape {
  std::vector<Matrix<T>> inputs;  // input to each linear layer
  std::vector<Matrix<T>> pre;     // pre-activation of each hidden layer
  Matrix<T> dropout_mask;         // scales the last layer's input; empty when off
};

/// Per-patch relation vectors. Row block t * K^2 + k holds triplet t at patch
/// k. Triplets 0, 1 are rows 1-2, 2 + a is row 3 ending in choice a; with
/// columns enabled, 10, 11 and 12 + a are the matching column triplets.
template <typename T>
struct RelationTape {
  Matrix<T> input;
  MlpTape<T> phi;
  Matrix<T> output;
};

/// Shared-rule embeddings. Pair p: 0 is (1,2), 1 + a is (1, 3a), 9 + a is
/// (2, 3a). `fused` has one row per pair of width 2 D_r: [row half, column half].
template <typename T>
struct SharedRuleTape {
  Matrix<T> row_input;
  MlpTape<T> row_psi;
  Matrix<T> row_output;  // per-patch r^{ij}_k
  Matrix<T> col_input;
  MlpTape<T> col_psi;
  Matrix<T> col_output;  // per-patch c^{ij}_k; empty when columns are off
  Matrix<T> fused;       // 17 x 2 D_r
};

template <typename T>
struct BlindHeadTape {
  Matrix<T> pooled;  // 8 x D
  Matrix<T> input;   // 8 x 2D: [own pooled vector, mean over choices]
  Matrix<T> hidden_pre;
  Matrix<T> hidden;
};

template <typename T>
struct ForwardTape {
  Matrix<T> images;  // 1 x (N * H * W)
  BackboneTape<T> backbone;
  Matrix<T> tokens;  // (N * K^2) x D after positional embedding
  std::vector<TransformerLayerTape<T>> layers;
  Matrix<T> attended;
  RelationTape<T> relations;
  SharedRuleTape<T> shared;
  BlindHeadTape<T> blind;
  Scores<T> scores{};
};

/// Spatially attentive transformer reasoner over a 16-panel puzzle.
///
/// Pipeline: conv backbone (stride 32) -> K^2 tokens per panel + learned
/// positional table -> pre-norm transformer -> per-patch relation MLP on row
/// (and column) triplets -> shared-rule MLP on line pairs -> mean over patches
/// -> inner product of the principal shared rule with each choice's
/// averaged shared rule.
template <typename T>
class SavirModel {
 public:
  explicit SavirModel(const ModelConfig& config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }

  /// Forward pass over 16 panels (8 context, 8 choices) of image_size^2 bytes.
  /// `dropout_rng` enables dropout; pass nullptr for evaluation. The tape
  /// keeps every intermediate needed by backward().
  Scores<T> forward(std::span<const std::uint8_t> pixels, ForwardTape<T>& tape, Rng* dropout_rng = nullptr) const;
  Scores<T> forward(std::span<const std::uint8_t> pixels) const;

  /// Accumulates dL/dθ for upstream score gradients into each Param::grad.
  void backward(const ForwardTape<T>& tape, const Scores<T>& dscores);

  // Stage-level entry points; each fills its part of the tape.
  Matrix<T> backbone_forward(const Matrix<T>& images, int count, BackboneTape<T>& tape) const;
  Matrix<T> tokenize(const Matrix<T>& features) const;
  Matrix<T> transformer_forward(const Matrix<T>& tokens, std::vector<TransformerLayerTape<T>>& tape) const;
  Matrix<T> relation_forward(const Matrix<T>& attended, RelationTape<T>& tape) const;
  Matrix<T> shared_rule_forward(const Matrix<T>& relations, SharedRuleTape<T>& tape, Rng* dropout_rng) const;
  static Scores<T> score(const Matrix<T>& fused);

  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// Copy with every parameter converted to scalar type U.
  template <typename U>
  SavirModel<U> cast() const {
    SavirModel<U> out(config_);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
    return out;
  }

  int triplet_count() const { return config_.use_columns ? 20 : 10; }
  static constexpr int kPairCount = 17;

  // Attention weights (group-major, then head) of one layer, for inspection.
  static const Matrix<T>& attention_weights(const TransformerLayerTape<T>& layer, int group, int head, int heads) {
    return layer.attention[static_cast<std::size_t>(group * heads + head)];
  }

 private:
  struct Block {
    LayerNorm<T> ln1;
    Linear<T> qkv;
    Linear<T> proj;
    LayerNorm<T> ln2;
    Linear<T> fc1;
    Linear<T> fc2;
  };

  Matrix<T> mlp_forward(std::vector<Linear<T>> const& layers, const Matrix<T>& x, MlpTape<T>& tape, double dropout,
                        Rng* rng) const;
  Matrix<T> mlp_backward(std::vector<Linear<T>>& layers, const MlpTape<T>& tape, const Matrix<T>& dy);
  Matrix<T> transformer_backward(const std::vector<TransformerLayerTape<T>>& tape, Matrix<T> dy);
  void backbone_backward(const BackboneTape<T>& tape, Matrix<T> dfeatures);

  ModelConfig config_;
  std::vector<Conv2d<T>> convs_;
  Param<T> positional_;  // K^2 x D
  std::vector<Block> blocks_;
  std::vector<Linear<T>> phi_;  // relation MLP, two layers
  std::vector<Linear<T>> psi_;  // shared-rule MLP, four layers
  std::vector<Linear<T>> blind_;
};

/// Cross-entropy of softmax(scores) against `label`.
template <typename T>
T cross_entropy(const Scores<T>& scores, int label);

/// softmax(scores) - onehot(label)
template <typename T>
Scores<T> cross_entropy_grad(const Scores<T>& scores, int label);

template <typename T>
Scores<T> softmax(const Scores<T>& scores);

/// Margin of the correct choice over the best other choice.
template <typename T>
T score_margin(const Scores<T>& scores, int label);

extern template class SavirModel<float>;
extern template class SavirModel<double>;

}  // namespace savir::model
