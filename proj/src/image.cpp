#include "layerkit/image.hpp"

#include <algorithm>
#include <cmath>

#include "layerkit/error.hpp"

namespace layerkit {

namespace {

void check_canvas(Canvas c) {
  if (c.width < 1 || c.height < 1) {
    throw Error("image.bad_canvas", "canvas dimensions must be positive, got " +
                                        std::to_string(c.width) + "x" + std::to_string(c.height));
  }
}

// Horizontal window count over each row, then the same vertically. A pixel
// survives when the number of set pixels in its (2r+1)^2 window satisfies `keep`.
template <typename Keep>
std::vector<std::uint8_t> window_filter(const std::vector<std::uint8_t>& bits, int w, int h, int r,
                                        Keep keep_row, Keep keep_col) {
  std::vector<std::uint8_t> tmp(bits.size());
  std::vector<int> prefix(static_cast<std::size_t>(std::max(w, h)) + 1);
  for (int y = 0; y < h; ++y) {
    prefix[0] = 0;
    for (int x = 0; x < w; ++x) prefix[x + 1] = prefix[x] + bits[static_cast<std::size_t>(y) * w + x];
    for (int x = 0; x < w; ++x) {
      const int lo = x - r, hi = x + r;
      const int count = prefix[std::min(hi, w - 1) + 1] - prefix[std::max(lo, 0)];
      tmp[static_cast<std::size_t>(y) * w + x] = keep_row(count, 2 * r + 1) ? 1 : 0;
    }
  }
  std::vector<std::uint8_t> out(bits.size());
  for (int x = 0; x < w; ++x) {
    prefix[0] = 0;
    for (int y = 0; y < h; ++y) prefix[y + 1] = prefix[y] + tmp[static_cast<std::size_t>(y) * w + x];
    for (int y = 0; y < h; ++y) {
      const int lo = y - r, hi = y + r;
      const int count = prefix[std::min(hi, h - 1) + 1] - prefix[std::max(lo, 0)];
      out[static_cast<std::size_t>(y) * w + x] = keep_col(count, 2 * r + 1) ? 1 : 0;
    }
  }
  return out;
}

// One pass of 1-D area resampling along rows (horizontal) of a double buffer.
std::vector<double> resample_axis(const std::vector<double>& src, int src_len, int dst_len,
                                  int lines, bool horizontal, int src_w) {
  // Buffer layout: 4 channels interleaved. For horizontal passes the row
  // stride is src_len; for vertical passes rows are `lines` wide.
  const double scale = static_cast<double>(src_len) / dst_len;
  std::vector<double> dst;
  if (horizontal) {
    dst.assign(static_cast<std::size_t>(lines) * dst_len * 4, 0.0);
  } else {
    dst.assign(static_cast<std::size_t>(dst_len) * src_w * 4, 0.0);
  }
  for (int d = 0; d < dst_len; ++d) {
    const double lo = d * scale;
    const double hi = lo + scale;
    const int first = static_cast<int>(std::floor(lo));
    const int last = std::min(src_len - 1, static_cast<int>(std::ceil(hi)) - 1);
    for (int s = first; s <= last; ++s) {
      const double weight = (std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s))) / scale;
      if (weight <= 0.0) continue;
      for (int line = 0; line < lines; ++line) {
        std::size_t si, di;
        if (horizontal) {
          si = (static_cast<std::size_t>(line) * src_len + s) * 4;
          di = (static_cast<std::size_t>(line) * dst_len + d) * 4;
        } else {
          si = (static_cast<std::size_t>(s) * src_w + line) * 4;
          di = (static_cast<std::size_t>(d) * src_w + line) * 4;
        }
        for (int c = 0; c < 4; ++c) dst[di + c] += weight * src[si + c];
      }
    }
  }
  return dst;
}

std::uint8_t to_byte(double v) {
  const double r = std::floor(v + 0.5 + 1e-9);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

}  // namespace

RasterImage::RasterImage(Canvas canvas, Rgba fill) : canvas_(canvas) {
  check_canvas(canvas);
  pixels_.assign(static_cast<std::size_t>(canvas.pixel_count()), fill);
}

RasterImage RasterImage::crop(const BoundingBox& box) const {
  const BoundingBox clipped = box.intersect({0, 0, width(), height()});
  if (clipped.empty()) throw Error("image.empty_crop", "crop box " + box.to_string() + " is outside the image");
  RasterImage out({clipped.width(), clipped.height()});
  for (int y = clipped.y1; y < clipped.y2; ++y) {
    for (int x = clipped.x1; x < clipped.x2; ++x) out.at(x - clipped.x1, y - clipped.y1) = at(x, y);
  }
  return out;
}

void RasterImage::blit(const RasterImage& src, int x, int y) {
  for (int sy = 0; sy < src.height(); ++sy) {
    const int ty = y + sy;
    if (ty < 0 || ty >= height()) continue;
    for (int sx = 0; sx < src.width(); ++sx) {
      const int tx = x + sx;
      if (tx < 0 || tx >= width()) continue;
      at(tx, ty) = src.at(sx, sy);
    }
  }
}

void RasterImage::fill_rect(const BoundingBox& box, Rgba color) {
  const BoundingBox c = box.intersect({0, 0, width(), height()});
  for (int y = c.y1; y < c.y2; ++y) {
    for (int x = c.x1; x < c.x2; ++x) at(x, y) = color;
  }
}

Mask::Mask(Canvas canvas) : canvas_(canvas) {
  check_canvas(canvas);
  bits_.assign(static_cast<std::size_t>(canvas.pixel_count()), 0);
}

Mask Mask::from_box(Canvas canvas, const BoundingBox& box) {
  Mask m(canvas);
  const BoundingBox c = box.intersect({0, 0, canvas.width, canvas.height});
  for (int y = c.y1; y < c.y2; ++y) {
    for (int x = c.x1; x < c.x2; ++x) m.set(x, y);
  }
  return m;
}

Mask Mask::from_alpha(const RasterImage& image) {
  Mask m(image.canvas());
  bool all_opaque = true;
  for (const Rgba& p : image.pixels()) {
    if (p.a != 255) {
      all_opaque = false;
      break;
    }
  }
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const Rgba& p = image.at(x, y);
      m.set(x, y, (all_opaque ? p.r : p.a) >= 128);
    }
  }
  return m;
}

std::int64_t Mask::area() const noexcept {
  std::int64_t n = 0;
  for (std::uint8_t b : bits_) n += b;
  return n;
}

BoundingBox Mask::bounds() const noexcept {
  int x1 = width(), y1 = height(), x2 = 0, y2 = 0;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (!test(x, y)) continue;
      x1 = std::min(x1, x);
      y1 = std::min(y1, y);
      x2 = std::max(x2, x + 1);
      y2 = std::max(y2, y + 1);
    }
  }
  if (x2 == 0) return {};
  return {x1, y1, x2, y2};
}

Mask Mask::dilated(int radius) const {
  if (radius <= 0) return *this;
  Mask out = *this;
  auto any = [](int count, int) { return count > 0; };
  out.bits_ = window_filter(bits_, width(), height(), radius, any, any);
  return out;
}

Mask Mask::eroded(int radius) const {
  if (radius <= 0) return *this;
  Mask out = *this;
  auto all = [](int count, int window) { return count == window; };
  out.bits_ = window_filter(bits_, width(), height(), radius, all, all);
  return out;
}

Mask Mask::united(const Mask& other) const {
  if (other.canvas_ != canvas_) throw Error("image.size_mismatch", "mask union over different canvases");
  Mask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

Mask Mask::intersected(const Mask& other) const {
  if (other.canvas_ != canvas_) throw Error("image.size_mismatch", "mask intersection over different canvases");
  Mask out = *this;
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

Mask Mask::inverted() const {
  Mask out = *this;
  for (auto& b : out.bits_) b = b ? 0 : 1;
  return out;
}

Mask Mask::clipped(const BoundingBox& box) const {
  Mask out = *this;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (!box.contains(x, y)) out.set(x, y, false);
    }
  }
  return out;
}

RasterImage Mask::to_image() const {
  RasterImage img(canvas_, Rgba{0, 0, 0, 255});
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      if (test(x, y)) img.at(x, y) = Rgba{255, 255, 255, 255};
    }
  }
  return img;
}

RasterImage resize_area(const RasterImage& image, Canvas target) {
  check_canvas(target);
  if (target == image.canvas()) return image;
  const int sw = image.width(), sh = image.height();
  std::vector<double> buf(static_cast<std::size_t>(sw) * sh * 4);
  for (std::size_t i = 0; i < image.pixels().size(); ++i) {
    const Rgba& p = image.pixels()[i];
    buf[i * 4 + 0] = p.r;
    buf[i * 4 + 1] = p.g;
    buf[i * 4 + 2] = p.b;
    buf[i * 4 + 3] = p.a;
  }
  auto horiz = resample_axis(buf, sw, target.width, sh, true, sw);
  auto vert = resample_axis(horiz, sh, target.height, target.width, false, target.width);
  RasterImage out(target);
  for (std::size_t i = 0; i < out.pixels().size(); ++i) {
    out.pixels()[i] = Rgba{to_byte(vert[i * 4]), to_byte(vert[i * 4 + 1]), to_byte(vert[i * 4 + 2]),
                           to_byte(vert[i * 4 + 3])};
  }
  return out;
}

RasterImage resize_longer_side(const RasterImage& image, int side) {
  const int w = image.width(), h = image.height();
  const int longer = std::max(w, h);
  if (longer == side) return image;
  Canvas target;
  if (w >= h) {
    target = {side, std::max<int>(1, static_cast<int>(round_half_up_div(static_cast<std::int64_t>(h) * side, w)))};
  } else {
    target = {std::max<int>(1, static_cast<int>(round_half_up_div(static_cast<std::int64_t>(w) * side, h))), side};
  }
  return resize_area(image, target);
}

RasterImage cutout(const RasterImage& image, const Mask& mask) {
  if (mask.canvas() != image.canvas()) throw Error("image.size_mismatch", "cutout mask does not match image");
  RasterImage out(image.canvas());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask.test(x, y)) out.at(x, y) = image.at(x, y);
    }
  }
  return out;
}

RasterImage paint_mask(const RasterImage& image, const Mask& mask, Rgba color) {
  if (mask.canvas() != image.canvas()) throw Error("image.size_mismatch", "paint mask does not match image");
  RasterImage out = image;
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (mask.test(x, y)) out.at(x, y) = color;
    }
  }
  return out;
}

std::uint64_t fingerprint(const RasterImage& image) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (int shift = 0; shift < 32; shift += 8) {
    mix(static_cast<std::uint8_t>(image.width() >> shift));
    mix(static_cast<std::uint8_t>(image.height() >> shift));
  }
  for (std::uint8_t b : image.bytes()) mix(b);
  return h;
}

}  // namespace layerkit
