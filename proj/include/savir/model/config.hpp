#pragma once

#include <string>
#include <vector>

namespace savir::model {

/// Every backbone stage halves the resolution; five stages give one token per
/// 32x32 pixel patch.
inline constexpr int kPatchSize = 32;
inline constexpr int kBackboneStages = 5;

struct ModelConfig {
  int image_size = 96;
  int d_model = 64;  // token width D
  int heads = 3;
  int head_dim = 0;  // 0: ceil(D / heads)
  int depth = 1;
  int mlp_hidden = 0;    // transformer MLP width; 0: 2D
  int relation_dim = 0;  // D_r; 0: D
  int phi_hidden = 0;    // 0: 2D
  int psi_hidden = 0;    // 0: 2D
  int blind_hidden = 0;  // context-blind head width; 0: 2D
  double dropout = 0.5;  // before the last layer of the shared-rule MLP
  bool use_columns = false;
  bool context_blind = false;
  bool joint_attention = false;  // attend across all 16 panels instead of per panel
  std::vector<int> backbone_channels = {32, 64, 96, 128};  // stages 1-4; stage 5 emits D

  int tokens_per_side() const { return image_size / kPatchSize; }
  int tokens_per_image() const { return tokens_per_side() * tokens_per_side(); }
  int resolved_head_dim() const { return head_dim > 0 ? head_dim : (d_model + heads - 1) / heads; }
  int resolved_mlp_hidden() const { return mlp_hidden > 0 ? mlp_hidden : 2 * d_model; }
  int resolved_relation_dim() const { return relation_dim > 0 ? relation_dim : d_model; }
  int resolved_phi_hidden() const { return phi_hidden > 0 ? phi_hidden : 2 * d_model; }
  int resolved_psi_hidden() const { return psi_hidden > 0 ? psi_hidden : 2 * d_model; }
  int resolved_blind_hidden() const { return blind_hidden > 0 ? blind_hidden : 2 * d_model; }

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace savir::model
