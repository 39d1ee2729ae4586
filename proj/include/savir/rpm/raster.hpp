#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "savir/rpm/types.hpp"

namespace savir::rpm {

inline constexpr int kPanelsPerPuzzle = 16;

/// 16 grayscale panels (context in reading order, then the choices), H = W.
struct PuzzleRaster {
  int image_size = 0;
  std::vector<std::uint8_t> pixels;  // 16 * image_size * image_size, row-major per panel
  int label = 0;

  std::span<const std::uint8_t> image(int index) const;
  std::span<std::uint8_t> image(int index);

  friend bool operator==(const PuzzleRaster&, const PuzzleRaster&) = default;
};

/// Accepted sizes: 32..224 in steps of 32.
bool valid_image_size(int size);

/// Fill intensity of a color level: 230 - 25 * level.
std::uint8_t fill_intensity(int color_level);

/// Draws one panel onto a 255-filled `size` x `size` buffer. Objects are
/// filled regular polygons (circle = 32-gon) centred in their cell with
/// circumradius (0.4 + 0.1 * size_level) * cell / 2, sampled at pixel centres
/// without anti-aliasing.
void render_panel(const PanelSymbolic& panel, int size, std::span<std::uint8_t> out);

/// Throws ConfigError for unsupported image sizes.
PuzzleRaster rasterize(const PuzzleSymbolic& puzzle, int image_size);

}  // namespace savir::rpm
