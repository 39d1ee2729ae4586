#include "savir/train/augment.hpp"

#include <algorithm>
#include <numeric>

namespace savir::train {

namespace {

// Context panel pairs exchanged by a line swap.
constexpr std::array<std::array<int, 2>, 3> kRowSwap = {{{0, 3}, {1, 4}, {2, 5}}};
constexpr std::array<std::array<int, 2>, 3> kColumnSwap = {{{0, 1}, {3, 4}, {6, 7}}};

}  // namespace

bool AugmentDraw::identity() const {
  for (int a = 0; a < 8; ++a) {
    if (destination[static_cast<std::size_t>(a)] != a) return false;
  }
  return !swap_lines;
}

AugmentDraw draw_augment(const AugmentFlags& flags, bool column_rules, Rng& rng) {
  AugmentDraw d;
  d.columns = column_rules;
  if (flags.row_col_shuffle) d.swap_lines = rng.bernoulli(0.5);
  if (flags.choice_shuffle) rng.shuffle(std::span<int, 8>(d.destination));
  return d;
}

void apply(const AugmentDraw& draw, rpm::PuzzleRaster& raster) {
  const std::size_t plane = static_cast<std::size_t>(raster.image_size) * static_cast<std::size_t>(raster.image_size);
  if (draw.swap_lines) {
    for (const auto& [a, b] : draw.columns ? kColumnSwap : kRowSwap) {
      std::swap_ranges(raster.image(a).begin(), raster.image(a).end(), raster.image(b).begin());
    }
  }
  std::vector<std::uint8_t> choices(raster.pixels.begin() + static_cast<std::ptrdiff_t>(8 * plane), raster.pixels.end());
  for (int a = 0; a < 8; ++a) {
    const auto src = choices.begin() + static_cast<std::ptrdiff_t>(a * plane);
    std::copy(src, src + static_cast<std::ptrdiff_t>(plane), raster.image(8 + draw.destination[static_cast<std::size_t>(a)]).begin());
  }
  raster.label = draw.destination[static_cast<std::size_t>(raster.label)];
}

void apply(const AugmentDraw& draw, rpm::PuzzleSymbolic& puzzle) {
  if (draw.swap_lines) {
    for (const auto& [a, b] : draw.columns ? kColumnSwap : kRowSwap) {
      std::swap(puzzle.context[static_cast<std::size_t>(a)], puzzle.context[static_cast<std::size_t>(b)]);
    }
  }
  const auto old = puzzle.choices;
  for (int a = 0; a < 8; ++a) puzzle.choices[static_cast<std::size_t>(draw.destination[static_cast<std::size_t>(a)])] = old[static_cast<std::size_t>(a)];
  puzzle.correct_index = draw.destination[static_cast<std::size_t>(puzzle.correct_index)];
}

}  // namespace savir::train
