#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "layerkit/geometry.hpp"

namespace layerkit {

struct Rgba {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 0;

  bool operator==(const Rgba&) const = default;
};
static_assert(sizeof(Rgba) == 4);

inline constexpr Rgba kTransparent{0, 0, 0, 0};
inline constexpr Rgba kPadGray{128, 128, 128, 255};

/// Row-major RGBA8 image. Alpha 255 is opaque.
class RasterImage {
 public:
  RasterImage() = default;
  explicit RasterImage(Canvas canvas, Rgba fill = kTransparent);

  const Canvas& canvas() const noexcept { return canvas_; }
  int width() const noexcept { return canvas_.width; }
  int height() const noexcept { return canvas_.height; }
  bool empty() const noexcept { return pixels_.empty(); }

  Rgba& at(int x, int y) noexcept { return pixels_[index(x, y)]; }
  const Rgba& at(int x, int y) const noexcept { return pixels_[index(x, y)]; }

  std::span<Rgba> pixels() noexcept { return pixels_; }
  std::span<const Rgba> pixels() const noexcept { return pixels_; }

  std::span<const std::uint8_t> bytes() const noexcept {
    return {reinterpret_cast<const std::uint8_t*>(pixels_.data()), pixels_.size() * 4};
  }

  /// Copy of the pixels inside `box` (clipped to the image).
  RasterImage crop(const BoundingBox& box) const;

  /// Copies `src` so that its top-left lands on (x, y); out-of-range pixels are dropped.
  void blit(const RasterImage& src, int x, int y);

  void fill_rect(const BoundingBox& box, Rgba color);

  bool operator==(const RasterImage&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(canvas_.width) +
           static_cast<std::size_t>(x);
  }

  Canvas canvas_{};
  std::vector<Rgba> pixels_;
};

/// Binary bitmap; values are 0 or 1.
class Mask {
 public:
  Mask() = default;
  explicit Mask(Canvas canvas);

  static Mask from_box(Canvas canvas, const BoundingBox& box);
  /// Pixels whose alpha (or, for opaque images, red channel) is >= 128.
  static Mask from_alpha(const RasterImage& image);

  const Canvas& canvas() const noexcept { return canvas_; }
  int width() const noexcept { return canvas_.width; }
  int height() const noexcept { return canvas_.height; }

  bool test(int x, int y) const noexcept { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool on = true) noexcept { bits_[index(x, y)] = on ? 1 : 0; }

  std::int64_t area() const noexcept;
  bool any() const noexcept { return area() > 0; }
  /// Tight bounding box of set pixels; empty box when the mask is empty.
  BoundingBox bounds() const noexcept;

  /// Square (Chebyshev) dilation by `radius` pixels.
  Mask dilated(int radius) const;
  Mask eroded(int radius) const;
  Mask united(const Mask& other) const;
  Mask intersected(const Mask& other) const;
  Mask inverted() const;
  /// Clears every pixel outside `box`.
  Mask clipped(const BoundingBox& box) const;

  /// White-on-black opaque rendering used for PNG persistence.
  RasterImage to_image() const;

  bool operator==(const Mask&) const = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(canvas_.width) +
           static_cast<std::size_t>(x);
  }

  Canvas canvas_{};
  std::vector<std::uint8_t> bits_;
};

/// Separable area-average resampling (box filter with fractional overlap),
/// round-half-up per channel.
RasterImage resize_area(const RasterImage& image, Canvas target);

/// Aspect-preserving resize so the longer side equals `side`.
RasterImage resize_longer_side(const RasterImage& image, int side);

/// Image with every pixel outside `mask` made transparent.
RasterImage cutout(const RasterImage& image, const Mask& mask);

/// Copy of `image` where masked pixels are painted `color`.
RasterImage paint_mask(const RasterImage& image, const Mask& mask, Rgba color);

/// 64-bit FNV-1a over the canvas size and pixel bytes.
std::uint64_t fingerprint(const RasterImage& image) noexcept;

}  // namespace layerkit
