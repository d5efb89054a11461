#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "layerkit/design.hpp"
#include "layerkit/image.hpp"

namespace layerkit {

/// A monospace face derived from the embedded DejaVu Sans Mono coverage
/// atlas. Synthetic variants differ in horizontal scale and stroke weight.
class FontFace {
 public:
  FontFace(std::string id, double advance_scale, int weight);

  const std::string& id() const noexcept { return id_; }
  double advance_scale() const noexcept { return advance_scale_; }
  int weight() const noexcept { return weight_; }

  double advance(double size) const noexcept;
  double line_height(double size) const noexcept;
  double ascent(double size) const noexcept;
  /// Width of the glyph cell drawn for one character at `size`.
  double cell_width(double size) const noexcept;

  /// Bilinear coverage in [0,1] at atlas coordinates (u, v) of glyph `ch`.
  double coverage(unsigned char ch, double u, double v) const noexcept;

 private:
  std::string id_;
  double advance_scale_;
  int weight_;
  std::shared_ptr<const std::vector<std::uint8_t>> atlas_;
};

/// Closed set of font faces keyed by opaque identifiers.
class FontCatalog {
 public:
  /// Identifier of the embedded face used when a lookup misses.
  static constexpr const char* kFallbackId = "builtin-mono";

  /// Fallback face plus the four synthetic monospace faces:
  /// mono-regular, mono-condensed, mono-wide, mono-bold.
  static FontCatalog builtin();

  /// Loads a `fonts.json` manifest mapping identifier -> face descriptor path.
  /// Descriptor: {"base": "builtin-mono", "advance_scale": 1.0, "weight": 0}.
  static FontCatalog load(const std::filesystem::path& manifest);

  void add(std::shared_ptr<const FontFace> face);
  void set_fallback_enabled(bool enabled) noexcept { fallback_enabled_ = enabled; }
  bool fallback_enabled() const noexcept { return fallback_enabled_; }

  bool contains(const std::string& id) const { return faces_.count(id) != 0; }
  std::size_t size() const noexcept { return faces_.size(); }
  std::vector<std::string> ids() const;

  struct Resolved {
    std::shared_ptr<const FontFace> face;
    bool fell_back = false;
  };
  /// Raises Error("text.unknown_font") when the id is missing and fallback is disabled.
  Resolved resolve(const std::string& id) const;

 private:
  std::map<std::string, std::shared_ptr<const FontFace>> faces_;
  bool fallback_enabled_ = true;
};

struct LaidOutLine {
  std::string text;
  double x = 0;         // left edge of the line in canvas pixels
  double baseline = 0;  // baseline y in canvas pixels
  double width = 0;
};

struct LineLayout {
  std::vector<LaidOutLine> lines;
  int font_size = 0;
  std::shared_ptr<const FontFace> face;
  bool line_count_clamped = false;
  bool font_fallback = false;
  /// Set when even the minimum font size does not fit the box.
  bool overflow = false;
};

inline constexpr int kMinFontSize = 4;
inline constexpr int kMaxFontSize = 200;

/// Splits content into `line_count` lines (clamped to the word count) with
/// the partition that minimizes the widest line, then picks the largest
/// integer font size in [4, 200] at which the block fits the box.
LineLayout layout_lines(const TextLayer& spec, const FontCatalog& catalog);

/// Word partition used by layout_lines; exposed for testing.
std::vector<std::string> balance_lines(const std::vector<std::string>& words, int line_count);

struct RenderedText {
  RasterImage image;
  bool out_of_bounds = false;
};

/// Canvas-sized RGBA raster of the text, rotated counterclockwise by
/// `spec.angle` degrees about the box center.
RenderedText rasterize_text(const TextLayer& spec, const LineLayout& layout, Canvas canvas);

/// Convenience: layout + rasterize.
RasterImage render_text_layer(const TextLayer& spec, const FontCatalog& catalog, Canvas canvas);

/// One <g> element holding one <text> element per line.
std::string to_svg(const TextLayer& spec, const LineLayout& layout);

struct SvgTextInfo {
  std::string content;
  QuantColor color;
  int angle = 0;
  std::vector<std::string> lines;
};

/// Parses a fragment produced by to_svg.
SvgTextInfo parse_svg_fragment(const std::string& fragment);

std::vector<std::string> split_words(const std::string& content);

}  // namespace layerkit
