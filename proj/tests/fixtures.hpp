#pragma once

#include <stdexcept>
#include <string>

#include "savir/model/savirt.hpp"
#include "savir/rpm/generator.hpp"
#include "savir/rpm/raster.hpp"

namespace fixtures {

inline savir::rpm::PuzzleRaster puzzle(int image_size, std::uint64_t seed,
                                       savir::rpm::Layout layout = savir::rpm::Layout::Center,
                                       savir::rpm::DistractorMode mode = savir::rpm::DistractorMode::IRaven) {
  savir::rpm::GeneratorConfig c;
  c.layout = layout;
  c.mode = mode;
  return savir::rpm::rasterize(savir::rpm::sample_puzzle(c, seed), image_size);
}

template <typename T>
savir::model::Param<T>& param(savir::model::SavirModel<T>& model, const std::string& name) {
  for (auto* p : model.parameters()) {
    if (p->name == name) return *p;
  }
  throw std::out_of_range("no parameter " + name);
}

inline savir::model::ModelConfig tiny_config() {
  savir::model::ModelConfig c;
  c.image_size = 64;
  c.d_model = 16;
  c.heads = 2;
  c.depth = 1;
  c.backbone_channels = {4, 6, 8, 8};
  return c;
}

}  // namespace fixtures
