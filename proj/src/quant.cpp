#include "layerkit/quant.hpp"

#include <algorithm>
#include <string>

#include "layerkit/error.hpp"

namespace layerkit {

bool QuantColor::valid() const noexcept {
  auto ok = [](int v) { return v >= 0 && v <= kColorBins; };
  return ok(r) && ok(g) && ok(b) && ok(a);
}

int quantize_color(int channel) {
  if (channel < 0 || channel > 255) {
    throw Error("quant.color_range", "color channel " + std::to_string(channel) + " outside [0,255]");
  }
  return static_cast<int>(round_half_up_div(static_cast<std::int64_t>(channel) * kColorBins, 255));
}

int dequantize_color(int bin) {
  if (bin < 0 || bin > kColorBins) {
    throw Error("quant.bin_range", "color bin " + std::to_string(bin) + " outside [0,25]");
  }
  return static_cast<int>(round_half_up_div(static_cast<std::int64_t>(bin) * 255, kColorBins));
}

namespace {
int square_side(Canvas canvas) {
  if (!canvas.is_square() || canvas.width < 1) {
    throw Error("quant.non_square", "plan coordinates need a square canvas, got " +
                                        std::to_string(canvas.width) + "x" + std::to_string(canvas.height));
  }
  return canvas.width;
}
}  // namespace

int coord_plan_to_canvas(int value, Canvas canvas) {
  const int side = square_side(canvas);
  const int v = std::clamp(value, 0, kPlanSpace);
  return static_cast<int>(round_half_up_div(static_cast<std::int64_t>(v) * side, kPlanSpace));
}

int coord_canvas_to_plan(int pixel, Canvas canvas) {
  const int side = square_side(canvas);
  const int p = std::clamp(pixel, 0, side);
  return std::clamp(static_cast<int>(round_half_up_div(static_cast<std::int64_t>(p) * kPlanSpace, side)), 0,
                    kPlanSpace);
}

BoundingBox box_plan_to_canvas(const BoundingBox& box, Canvas canvas) {
  return {coord_plan_to_canvas(box.x1, canvas), coord_plan_to_canvas(box.y1, canvas),
          coord_plan_to_canvas(box.x2, canvas), coord_plan_to_canvas(box.y2, canvas)};
}

BoundingBox box_canvas_to_plan(const BoundingBox& box, Canvas canvas) {
  return {coord_canvas_to_plan(box.x1, canvas), coord_canvas_to_plan(box.y1, canvas),
          coord_canvas_to_plan(box.x2, canvas), coord_canvas_to_plan(box.y2, canvas)};
}

}  // namespace layerkit
