#include "savir/model/config.hpp"

#include <json.hpp>

#include "savir/error.hpp"
#include "savir/rpm/raster.hpp"

namespace savir::model {

void ModelConfig::validate() const {
  if (!rpm::valid_image_size(image_size)) {
    throw ConfigError("image size " + std::to_string(image_size) + " is not a multiple of 32 in [32, 224]");
  }
  if (d_model < 1) throw ConfigError("d_model must be positive");
  if (heads < 1) throw ConfigError("heads must be positive");
  if (depth < 1) throw ConfigError("depth must be at least 1");
  if (head_dim < 0 || mlp_hidden < 0 || relation_dim < 0 || phi_hidden < 0 || psi_hidden < 0 || blind_hidden < 0) {
    throw ConfigError("layer widths must be non-negative (0 selects the default)");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (backbone_channels.size() != kBackboneStages - 1) {
    throw ConfigError("backbone_channels needs " + std::to_string(kBackboneStages - 1) + " entries");
  }
  for (int c : backbone_channels) {
    if (c < 1) throw ConfigError("backbone channel counts must be positive");
  }
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["image_size"] = image_size;
  j["d_model"] = d_model;
  j["heads"] = heads;
  j["head_dim"] = head_dim;
  j["depth"] = depth;
  j["mlp_hidden"] = mlp_hidden;
  j["relation_dim"] = relation_dim;
  j["phi_hidden"] = phi_hidden;
  j["psi_hidden"] = psi_hidden;
  j["blind_hidden"] = blind_hidden;
  j["dropout"] = dropout;
  j["use_columns"] = use_columns;
  j["context_blind"] = context_blind;
  j["joint_attention"] = joint_attention;
  j["backbone_channels"] = backbone_channels;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.image_size = j.at("image_size").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.heads = j.at("heads").get<int>();
    c.head_dim = j.at("head_dim").get<int>();
    c.depth = j.at("depth").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.relation_dim = j.at("relation_dim").get<int>();
    c.phi_hidden = j.at("phi_hidden").get<int>();
    c.psi_hidden = j.at("psi_hidden").get<int>();
    c.blind_hidden = j.at("blind_hidden").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.use_columns = j.at("use_columns").get<bool>();
    c.context_blind = j.at("context_blind").get<bool>();
    c.joint_attention = j.at("joint_attention").get<bool>();
    c.backbone_channels = j.at("backbone_channels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace savir::model
