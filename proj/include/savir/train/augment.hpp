#pragma once

#include <array>

#include "savir/rng.hpp"
#include "savir/rpm/raster.hpp"
#include "savir/rpm/types.hpp"

namespace savir::train {

struct AugmentFlags {
  bool row_col_shuffle = true;
  bool choice_shuffle = true;
};

/// One draw of the augmentation. `destination[a]` is the slot choice a moves
/// to, so the label y becomes destination[y].
struct AugmentDraw {
  bool swap_lines = false;
  bool columns = false;  // swap the first two columns instead of rows
  std::array<int, 8> destination = {0, 1, 2, 3, 4, 5, 6, 7};

  bool identity() const;
};

/// Swap of the first two context lines with probability 1/2, then a uniform
/// permutation of the choices.
AugmentDraw draw_augment(const AugmentFlags& flags, bool column_rules, Rng& rng);

void apply(const AugmentDraw& draw, rpm::PuzzleRaster& raster);
void apply(const AugmentDraw& draw, rpm::PuzzleSymbolic& puzzle);

}  // namespace savir::train
