#include "savir/rpm/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "savir/error.hpp"

namespace savir::rpm {

namespace {

struct ShapeSpec {
  int sides;
  double start_angle;
};

ShapeSpec shape_spec(int type) {
  constexpr double pi = std::numbers::pi;
  switch (static_cast<Shape>(type)) {
    case Shape::Triangle: return {3, -pi / 2};
    case Shape::Square: return {4, -pi / 4};
    case Shape::Pentagon: return {5, -pi / 2};
    case Shape::Hexagon: return {6, 0.0};
    case Shape::Circle: return {32, 0.0};
  }
  return {32, 0.0};
}

void fill_polygon(double cx, double cy, double radius, ShapeSpec shape, std::uint8_t intensity, int size,
                  std::span<std::uint8_t> out) {
  std::vector<std::array<double, 2>> v(static_cast<std::size_t>(shape.sides));
  for (int i = 0; i < shape.sides; ++i) {
    const double a = shape.start_angle + 2.0 * std::numbers::pi * i / shape.sides;
    v[static_cast<std::size_t>(i)] = {cx + radius * std::cos(a), cy + radius * std::sin(a)};
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 = std::min(size - 1, static_cast<int>(std::ceil(cx + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 = std::min(size - 1, static_cast<int>(std::ceil(cy + radius)));
  for (int y = y0; y <= y1; ++y) {
    const double py = y + 0.5;
    for (int x = x0; x <= x1; ++x) {
      const double px = x + 0.5;
      bool inside = true;
      for (std::size_t i = 0; i < v.size() && inside; ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        // Vertices run clockwise on screen (y down), so interior points sit
        // on the non-negative side of every edge.
        const double cross = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
        inside = cross >= 0.0;
      }
      if (inside) out[static_cast<std::size_t>(y * size + x)] = intensity;
    }
  }
}

}  // namespace

std::span<const std::uint8_t> PuzzleRaster::image(int index) const {
  const auto n = static_cast<std::size_t>(image_size) * static_cast<std::size_t>(image_size);
  return std::span(pixels).subspan(static_cast<std::size_t>(index) * n, n);
}

std::span<std::uint8_t> PuzzleRaster::image(int index) {
  const auto n = static_cast<std::size_t>(image_size) * static_cast<std::size_t>(image_size);
  return std::span(pixels).subspan(static_cast<std::size_t>(index) * n, n);
}

bool valid_image_size(int size) { return size >= 32 && size <= 224 && size % 32 == 0; }

std::uint8_t fill_intensity(int color_level) { return static_cast<std::uint8_t>(230 - 25 * color_level); }

void render_panel(const PanelSymbolic& panel, int size, std::span<std::uint8_t> out) {
  std::ranges::fill(out, std::uint8_t{255});
  const int per_side = panel.layout == Layout::Center ? 1 : (panel.layout == Layout::Grid2x2 ? 2 : 3);
  const double cell = static_cast<double>(size) / per_side;
  for (const auto& o : panel.objects) {
    const double cx = (o.cell % per_side + 0.5) * cell;
    const double cy = (o.cell / per_side + 0.5) * cell;
    const double radius = (0.4 + 0.1 * o.size) * cell / 2.0;
    fill_polygon(cx, cy, radius, shape_spec(o.type), fill_intensity(o.color), size, out);
  }
}

PuzzleRaster rasterize(const PuzzleSymbolic& puzzle, int image_size) {
  if (!valid_image_size(image_size)) {
    throw ConfigError("image size " + std::to_string(image_size) + " is not a multiple of 32 in [32, 224]");
  }
  PuzzleRaster r;
  r.image_size = image_size;
  r.label = puzzle.correct_index;
  r.pixels.resize(static_cast<std::size_t>(kPanelsPerPuzzle) * image_size * image_size);
  for (int i = 0; i < 8; ++i) render_panel(puzzle.context[static_cast<std::size_t>(i)], image_size, r.image(i));
  for (int i = 0; i < 8; ++i) render_panel(puzzle.choices[static_cast<std::size_t>(i)], image_size, r.image(8 + i));
  return r;
}

}  // namespace savir::rpm
