#include "layerkit/design.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "layerkit/codec.hpp"
#include "layerkit/text_render.hpp"

namespace layerkit {

std::string_view to_string(Alignment a) noexcept {
  switch (a) {
    case Alignment::left: return "left";
    case Alignment::center: return "center";
    case Alignment::right: return "right";
  }
  return "center";
}

std::optional<Alignment> parse_alignment(std::string_view s) noexcept {
  if (s == "left") return Alignment::left;
  if (s == "center") return Alignment::center;
  if (s == "right") return Alignment::right;
  return std::nullopt;
}

std::vector<Violation> check_text_layer(const TextLayer& text, Canvas canvas, std::string_view where) {
  std::vector<Violation> out;
  const std::string at(where);
  if (split_words(text.content).empty()) out.push_back({"text.empty_content", at + ": content is empty"});
  if (!text.box.valid_within(canvas.width, canvas.height)) {
    out.push_back({"text.bad_box", at + ": box " + text.box.to_string() + " is not inside the canvas"});
  }
  if (!text.color.valid()) out.push_back({"text.color_range", at + ": color bins must lie in [0,25]"});
  if (text.font.empty()) out.push_back({"text.font_missing", at + ": font identifier is empty"});
  if (text.line_count < 1) out.push_back({"text.line_count", at + ": line count must be >= 1"});
  if (text.angle < -180 || text.angle > 180) out.push_back({"text.angle_range", at + ": angle outside [-180,180]"});
  return out;
}

std::vector<Violation> check_design(const LayeredDesign& d) {
  std::vector<Violation> out;
  if (d.canvas.width < 1 || d.canvas.height < 1) {
    out.push_back({"design.bad_canvas", "canvas must be at least 1x1"});
    return out;
  }
  if (d.background.canvas() != d.canvas) {
    out.push_back({"design.background_size", "background does not match the canvas"});
  }
  for (std::size_t i = 0; i < d.objects.size(); ++i) {
    const auto& o = d.objects[i];
    const std::string at = "object " + std::to_string(i);
    if (o.image.canvas() != d.canvas || o.mask.canvas() != d.canvas) {
      out.push_back({"design.object_size", at + ": image or mask does not match the canvas"});
      continue;
    }
    if (!o.box.valid_within(d.canvas.width, d.canvas.height)) {
      out.push_back({"design.object_box", at + ": box " + o.box.to_string() + " is not inside the canvas"});
    }
    const BoundingBox allowed = o.box.expanded(kMaskDilation);
    bool mask_outside = false, alpha_outside = false;
    for (int y = 0; y < d.canvas.height; ++y) {
      for (int x = 0; x < d.canvas.width; ++x) {
        const bool on = o.mask.test(x, y);
        if (on && !allowed.contains(x, y)) mask_outside = true;
        if (!on && o.image.at(x, y).a != 0) alpha_outside = true;
      }
    }
    if (mask_outside) out.push_back({"design.mask_outside_box", at + ": mask extends past the dilated box"});
    if (alpha_outside) out.push_back({"design.alpha_outside_mask", at + ": image is not transparent outside the mask"});
  }
  for (std::size_t i = 0; i < d.texts.size(); ++i) {
    auto v = check_text_layer(d.texts[i], d.canvas, "text " + std::to_string(i));
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

void validate_design(const LayeredDesign& design) {
  auto v = check_design(design);
  if (!v.empty()) throw ValidationError(std::move(v));
}

void blend_over(RasterImage& dst, const RasterImage& src) {
  if (dst.canvas() != src.canvas()) throw Error("design.size_mismatch", "blend over images of different size");
  auto px = dst.pixels();
  auto sp = src.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const Rgba& s = sp[i];
    Rgba& d = px[i];
    const int a = s.a;
    if (a == 0) {
      d.a = 255;
      continue;
    }
    if (a == 255) {
      d = Rgba{s.r, s.g, s.b, 255};
      continue;
    }
    auto mix = [a](int sc, int dc) {
      return static_cast<std::uint8_t>(round_half_up_div(static_cast<std::int64_t>(a) * sc + (255 - a) * dc, 255));
    };
    d = Rgba{mix(s.r, d.r), mix(s.g, d.g), mix(s.b, d.b), 255};
  }
}

namespace {
void require_sizes(const LayeredDesign& design) {
  if (design.background.canvas() != design.canvas) {
    throw Error("design.size_mismatch", "background does not match the design canvas");
  }
  for (const auto& o : design.objects) {
    if (o.image.canvas() != design.canvas) throw Error("design.size_mismatch", "object layer does not match the design canvas");
  }
}
}  // namespace

RasterImage composite_without_text(const LayeredDesign& design) {
  require_sizes(design);
  RasterImage out = design.background;
  for (auto& p : out.pixels()) p.a = 255;
  for (const auto& o : design.objects) blend_over(out, o.image);
  return out;
}

RasterImage composite(const LayeredDesign& design, const FontCatalog& catalog) {
  RasterImage out = composite_without_text(design);
  for (const auto& t : design.texts) blend_over(out, render_text_layer(t, catalog, design.canvas));
  return out;
}

RasterImage composite(const LayeredDesign& design) {
  static const FontCatalog catalog = FontCatalog::builtin();
  return composite(design, catalog);
}

std::pair<RasterImage, PadRecord> pad_to_square(const RasterImage& image) {
  const int side = std::max(image.width(), image.height());
  PadRecord rec{image.canvas(), side, (side - image.width()) / 2, (side - image.height()) / 2};
  if (image.width() == image.height()) return {image, rec};
  RasterImage out({side, side}, kPadGray);
  out.blit(image, rec.offset_x, rec.offset_y);
  return {std::move(out), rec};
}

namespace {
void check_record(Canvas c, const PadRecord& rec) {
  const bool ok = c.width == rec.side && c.height == rec.side && rec.offset_x >= 0 && rec.offset_y >= 0 &&
                  rec.original.width >= 1 && rec.original.height >= 1 &&
                  rec.offset_x + rec.original.width <= rec.side && rec.offset_y + rec.original.height <= rec.side;
  if (!ok) {
    throw Error("design.pad_mismatch", "pad record (side " + std::to_string(rec.side) + ") does not fit a " +
                                           std::to_string(c.width) + "x" + std::to_string(c.height) + " input");
  }
}
}  // namespace

RasterImage crop_from_square(const RasterImage& image, const PadRecord& record) {
  check_record(image.canvas(), record);
  if (record.is_identity()) return image;
  return image.crop(record.content_rect());
}

LayeredDesign crop_from_square(const LayeredDesign& design, const PadRecord& record) {
  check_record(design.canvas, record);
  if (record.is_identity()) return design;
  const BoundingBox rect = record.content_rect();
  const int dx = -record.offset_x, dy = -record.offset_y;
  const BoundingBox local{0, 0, record.original.width, record.original.height};

  LayeredDesign out;
  out.canvas = record.original;
  out.background = design.background.crop(rect);
  for (const auto& o : design.objects) {
    const BoundingBox box = o.box.translated(dx, dy).intersect(local);
    if (box.empty()) continue;
    ObjectLayer layer;
    layer.image = o.image.crop(rect);
    Mask mask(record.original);
    for (int y = 0; y < record.original.height; ++y) {
      for (int x = 0; x < record.original.width; ++x) mask.set(x, y, o.mask.test(x + record.offset_x, y + record.offset_y));
    }
    layer.mask = std::move(mask);
    layer.box = box;
    out.objects.push_back(std::move(layer));
  }
  for (const auto& t : design.texts) {
    TextLayer text = t;
    text.box = t.box.translated(dx, dy).intersect(local);
    if (text.box.empty()) continue;
    out.texts.push_back(std::move(text));
  }
  return out;
}

namespace {
std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string data_uri(const RasterImage& image) {
  return "data:image/png;base64," + base64_encode(encode_png(image));
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2fpx", v);
  return buf;
}
}  // namespace

std::string preview_html(const LayeredDesign& design, const FontCatalog& catalog) {
  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Layered design preview</title>\n"
       << "<style>\n"
       << ".design{position:relative;overflow:hidden;}\n"
       << ".layer{position:absolute;margin:0;}\n"
       << ".text-layer{white-space:pre;font-family:'DejaVu Sans Mono',monospace;user-select:text;}\n"
       << "</style>\n</head>\n<body>\n";
  html << "<div class=\"design\" style=\"width:" << design.canvas.width << "px;height:" << design.canvas.height
       << "px;\">\n";
  html << "<img class=\"layer background\" style=\"left:0;top:0;z-index:0;\" src=\"" << data_uri(design.background)
       << "\">\n";
  int z = 1;
  for (std::size_t i = 0; i < design.objects.size(); ++i, ++z) {
    const auto& o = design.objects[i];
    BoundingBox region = o.mask.bounds();
    if (region.empty()) region = o.box;
    region = region.intersect({0, 0, design.canvas.width, design.canvas.height});
    if (region.empty()) continue;
    html << "<img class=\"layer object\" data-index=\"" << i << "\" style=\"left:" << region.x1 << "px;top:"
         << region.y1 << "px;z-index:" << z << ";\" src=\"" << data_uri(o.image.crop(region)) << "\">\n";
  }
  for (std::size_t i = 0; i < design.texts.size(); ++i, ++z) {
    const auto& t = design.texts[i];
    const LineLayout layout = layout_lines(t, catalog);
    const double lh = layout.face->line_height(layout.font_size);
    const double top = layout.lines.front().baseline - layout.face->ascent(layout.font_size);
    char color[64];
    std::snprintf(color, sizeof color, "rgba(%d,%d,%d,%.4f)", dequantize_color(t.color.r),
                  dequantize_color(t.color.g), dequantize_color(t.color.b), dequantize_color(t.color.a) / 255.0);
    html << "<div class=\"layer text-layer\" data-index=\"" << i << "\" data-content=\"" << html_escape(t.content)
         << "\" data-font=\"" << html_escape(t.font) << "\" style=\"left:" << t.box.x1 << "px;top:" << px(top)
         << ";width:" << t.box.width() << "px;z-index:" << z << ";font-size:" << layout.font_size
         << "px;line-height:" << px(lh) << ";text-align:" << to_string(t.alignment) << ";color:" << color
         << ";transform:rotate(" << -t.angle << "deg);transform-origin:" << px(t.box.width() / 2.0) << ' '
         << px((t.box.y1 + t.box.y2) / 2.0 - top) << ";\">";
    for (std::size_t l = 0; l < layout.lines.size(); ++l) {
      if (l) html << "<br>";
      html << html_escape(layout.lines[l].text);
    }
    html << "</div>\n";
  }
  html << "</div>\n</body>\n</html>\n";
  return html.str();
}

void export_preview(const LayeredDesign& design, const std::filesystem::path& path, const FontCatalog& catalog) {
  write_text_file(path, preview_html(design, catalog));
}

void export_preview(const LayeredDesign& design, const std::filesystem::path& path) {
  export_preview(design, path, FontCatalog::builtin());
}

}  // namespace layerkit
