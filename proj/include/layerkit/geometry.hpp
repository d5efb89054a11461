#pragma once

#include <algorithm>
#include <cstdint>
#include <string>

namespace layerkit {

struct Canvas {
  int width = 0;
  int height = 0;

  bool is_square() const noexcept { return width == height; }
  std::int64_t pixel_count() const noexcept {
    return static_cast<std::int64_t>(width) * static_cast<std::int64_t>(height);
  }
  bool operator==(const Canvas&) const = default;
};

/// Half-open pixel rectangle [x1, x2) x [y1, y2).
struct BoundingBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const noexcept { return x2 - x1; }
  int height() const noexcept { return y2 - y1; }
  std::int64_t area() const noexcept {
    return empty() ? 0 : static_cast<std::int64_t>(width()) * height();
  }
  bool empty() const noexcept { return x2 <= x1 || y2 <= y1; }

  /// True when the box is non-degenerate and lies inside [0,w] x [0,h].
  bool valid_within(int w, int h) const noexcept {
    return x1 >= 0 && y1 >= 0 && x1 < x2 && y1 < y2 && x2 <= w && y2 <= h;
  }

  BoundingBox intersect(const BoundingBox& o) const noexcept {
    return {std::max(x1, o.x1), std::max(y1, o.y1), std::min(x2, o.x2), std::min(y2, o.y2)};
  }

  BoundingBox expanded(int margin) const noexcept {
    return {x1 - margin, y1 - margin, x2 + margin, y2 + margin};
  }

  BoundingBox translated(int dx, int dy) const noexcept {
    return {x1 + dx, y1 + dy, x2 + dx, y2 + dy};
  }

  bool contains(int x, int y) const noexcept { return x >= x1 && x < x2 && y >= y1 && y < y2; }

  std::string to_string() const {
    return "(" + std::to_string(x1) + ", " + std::to_string(y1) + ", " + std::to_string(x2) +
           ", " + std::to_string(y2) + ")";
  }

  bool operator==(const BoundingBox&) const = default;
};

/// floor(num / den + 1/2) for non-negative num and positive den.
constexpr std::int64_t round_half_up_div(std::int64_t num, std::int64_t den) noexcept {
  return (2 * num + den) / (2 * den);
}

}  // namespace layerkit
