#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "layerkit/error.hpp"
#include "layerkit/geometry.hpp"
#include "layerkit/image.hpp"
#include "layerkit/quant.hpp"

namespace layerkit {

class FontCatalog;

/// Default working/output canvas.
inline constexpr Canvas kWorkingCanvas{512, 512};

enum class Alignment { left, center, right };

std::string_view to_string(Alignment a) noexcept;
std::optional<Alignment> parse_alignment(std::string_view s) noexcept;

struct TextLayer {
  BoundingBox box;  // canvas space
  std::string content;
  QuantColor color;
  std::string font;
  Alignment alignment = Alignment::center;
  int line_count = 1;
  int angle = 0;  // counterclockwise degrees in [-180, 180]

  bool operator==(const TextLayer&) const = default;
};

struct ObjectLayer {
  RasterImage image;  // canvas-sized cutout, transparent outside mask
  Mask mask;          // canvas-sized
  BoundingBox box;    // canvas space

  bool operator==(const ObjectLayer&) const = default;
};

/// Background at the bottom, then objects bottom-to-top, then texts
/// bottom-to-top. Texts always stack above objects.
struct LayeredDesign {
  Canvas canvas;
  RasterImage background;
  std::vector<ObjectLayer> objects;
  std::vector<TextLayer> texts;

  bool operator==(const LayeredDesign&) const = default;
};

/// Margin by which an object mask may extend past its box.
inline constexpr int kMaskDilation = 4;

/// Collects invariant violations (sizes, boxes, mask containment, text fields).
std::vector<Violation> check_design(const LayeredDesign& design);
void validate_design(const LayeredDesign& design);

std::vector<Violation> check_text_layer(const TextLayer& text, Canvas canvas, std::string_view where);

/// src-over `dst` in place; dst is treated as opaque. Channels use
/// round-half-up of (a*src + (255-a)*dst) / 255.
void blend_over(RasterImage& dst, const RasterImage& src);

/// Opaque composite: background, objects in order, then rendered texts.
RasterImage composite(const LayeredDesign& design, const FontCatalog& catalog);
RasterImage composite(const LayeredDesign& design);

/// Background plus objects only.
RasterImage composite_without_text(const LayeredDesign& design);

struct PadRecord {
  Canvas original;
  int side = 0;
  int offset_x = 0;
  int offset_y = 0;

  bool is_identity() const noexcept { return offset_x == 0 && offset_y == 0 && original.is_square(); }
  BoundingBox content_rect() const noexcept {
    return {offset_x, offset_y, offset_x + original.width, offset_y + original.height};
  }
  bool operator==(const PadRecord&) const = default;
};

/// Centers the image on a max(w,h) square filled with gray (128,128,128).
std::pair<RasterImage, PadRecord> pad_to_square(const RasterImage& image);
RasterImage crop_from_square(const RasterImage& image, const PadRecord& record);
/// Crops every raster and clips every box/mask to the original rectangle.
/// Layers whose box lies entirely in the padding are dropped.
LayeredDesign crop_from_square(const LayeredDesign& design, const PadRecord& record);

/// Self-contained HTML page: rasters embedded as base64 PNG, texts as
/// absolutely positioned markup nodes.
std::string preview_html(const LayeredDesign& design, const FontCatalog& catalog);
void export_preview(const LayeredDesign& design, const std::filesystem::path& path,
                    const FontCatalog& catalog);
void export_preview(const LayeredDesign& design, const std::filesystem::path& path);

}  // namespace layerkit
