#pragma once

#include "layerkit/geometry.hpp"

namespace layerkit {

/// Side length of the square coordinate space the plan model reads and writes.
inline constexpr int kPlanSpace = 336;
/// Highest color bin; channels map [0,255] onto [0,25].
inline constexpr int kColorBins = 25;

struct QuantColor {
  int r = 0;
  int g = 0;
  int b = 0;
  int a = kColorBins;

  bool valid() const noexcept;
  bool operator==(const QuantColor&) const = default;
};

int quantize_color(int channel);
int dequantize_color(int bin);

/// Plan-space coordinate to canvas pixel on a square canvas.
int coord_plan_to_canvas(int value, Canvas canvas);
/// Canvas pixel to plan space, clamped into [0, 336].
int coord_canvas_to_plan(int pixel, Canvas canvas);

BoundingBox box_plan_to_canvas(const BoundingBox& box, Canvas canvas);
BoundingBox box_canvas_to_plan(const BoundingBox& box, Canvas canvas);

}  // namespace layerkit
