#include "layerkit/text_render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "layerkit/codec.hpp"
#include "layerkit/error.hpp"

namespace layerkit {

namespace {
#include "font_atlas_data.inc"

constexpr int kGlyphCount = kAtlasLastChar - kAtlasFirstChar + 1;
constexpr std::size_t kCellBytes = static_cast<std::size_t>(kAtlasCellWidth) * kAtlasCellHeight;
static_assert(sizeof(kAtlasCoverage) == kCellBytes * kGlyphCount);

// Coverage atlas with strokes thickened by `weight` atlas pixels.
std::shared_ptr<const std::vector<std::uint8_t>> make_atlas(int weight) {
  auto atlas = std::make_shared<std::vector<std::uint8_t>>(std::begin(kAtlasCoverage), std::end(kAtlasCoverage));
  if (weight <= 0) return atlas;
  std::vector<std::uint8_t> out(atlas->size());
  for (int g = 0; g < kGlyphCount; ++g) {
    const std::size_t base = kCellBytes * g;
    for (int y = 0; y < kAtlasCellHeight; ++y) {
      for (int x = 0; x < kAtlasCellWidth; ++x) {
        std::uint8_t best = 0;
        for (int dx = -weight; dx <= weight; ++dx) {
          const int sx = x + dx;
          if (sx < 0 || sx >= kAtlasCellWidth) continue;
          best = std::max(best, (*atlas)[base + static_cast<std::size_t>(y) * kAtlasCellWidth + sx]);
        }
        out[base + static_cast<std::size_t>(y) * kAtlasCellWidth + x] = best;
      }
    }
  }
  return std::make_shared<std::vector<std::uint8_t>>(std::move(out));
}

unsigned char glyph_index_char(unsigned char ch) {
  return (ch < kAtlasFirstChar || ch > kAtlasLastChar) ? '?' : ch;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string xml_unescape(const std::string& s) {
  static const std::pair<const char*, char> table[] = {
      {"&amp;", '&'}, {"&lt;", '<'}, {"&gt;", '>'}, {"&quot;", '"'}, {"&apos;", '\''}};
  std::string out;
  for (std::size_t i = 0; i < s.size();) {
    bool matched = false;
    if (s[i] == '&') {
      for (const auto& [entity, ch] : table) {
        const std::size_t len = std::char_traits<char>::length(entity);
        if (s.compare(i, len, entity) == 0) {
          out += ch;
          i += len;
          matched = true;
          break;
        }
      }
    }
    if (!matched) out += s[i++];
  }
  return out;
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

FontFace::FontFace(std::string id, double advance_scale, int weight)
    : id_(std::move(id)), advance_scale_(advance_scale), weight_(weight), atlas_(make_atlas(weight)) {
  if (!(advance_scale > 0.2 && advance_scale < 5.0)) {
    throw Error("text.bad_face", "advance_scale out of range for face " + id_);
  }
  if (weight < 0 || weight > 4) throw Error("text.bad_face", "weight out of range for face " + id_);
}

double FontFace::advance(double size) const noexcept {
  return size * kAtlasAdvance / kAtlasEm * advance_scale_;
}

double FontFace::line_height(double size) const noexcept {
  return size * static_cast<double>(kAtlasCellHeight) / kAtlasEm;
}

double FontFace::ascent(double size) const noexcept {
  return size * static_cast<double>(kAtlasAscent) / kAtlasEm;
}

double FontFace::cell_width(double size) const noexcept {
  return size * static_cast<double>(kAtlasCellWidth) / kAtlasEm * advance_scale_;
}

double FontFace::coverage(unsigned char ch, double u, double v) const noexcept {
  const int g = glyph_index_char(ch) - kAtlasFirstChar;
  const std::uint8_t* cell = atlas_->data() + kCellBytes * g;
  // Sample positions are pixel centers.
  const double fx = u - 0.5, fy = v - 0.5;
  const int x0 = static_cast<int>(std::floor(fx));
  const int y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0, ty = fy - y0;
  auto texel = [&](int x, int y) -> double {
    if (x < 0 || y < 0 || x >= kAtlasCellWidth || y >= kAtlasCellHeight) return 0.0;
    return cell[static_cast<std::size_t>(y) * kAtlasCellWidth + x] / 255.0;
  };
  const double top = texel(x0, y0) * (1 - tx) + texel(x0 + 1, y0) * tx;
  const double bottom = texel(x0, y0 + 1) * (1 - tx) + texel(x0 + 1, y0 + 1) * tx;
  return top * (1 - ty) + bottom * ty;
}

FontCatalog FontCatalog::builtin() {
  FontCatalog catalog;
  catalog.add(std::make_shared<FontFace>(kFallbackId, 1.0, 0));
  catalog.add(std::make_shared<FontFace>("mono-regular", 1.0, 0));
  catalog.add(std::make_shared<FontFace>("mono-condensed", 0.8, 0));
  catalog.add(std::make_shared<FontFace>("mono-wide", 1.25, 0));
  catalog.add(std::make_shared<FontFace>("mono-bold", 1.0, 1));
  return catalog;
}

FontCatalog FontCatalog::load(const std::filesystem::path& manifest) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(manifest));
  } catch (const nlohmann::json::exception& e) {
    throw Error("text.bad_catalog", manifest.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw Error("text.bad_catalog", manifest.string() + ": expected an object");
  FontCatalog catalog;
  catalog.add(std::make_shared<FontFace>(kFallbackId, 1.0, 0));
  const auto dir = manifest.parent_path();
  for (const auto& [id, value] : doc.items()) {
    if (!value.is_string()) throw Error("text.bad_catalog", "font '" + id + "' must map to a path");
    const auto face_path = dir / value.get<std::string>();
    nlohmann::json face;
    try {
      face = nlohmann::json::parse(read_text_file(face_path));
    } catch (const nlohmann::json::exception& e) {
      throw Error("text.bad_catalog", face_path.string() + ": " + e.what());
    }
    if (face.value("base", std::string{}) != kFallbackId) {
      throw Error("text.bad_catalog", face_path.string() + ": unsupported base face");
    }
    catalog.add(std::make_shared<FontFace>(id, face.value("advance_scale", 1.0), face.value("weight", 0)));
  }
  return catalog;
}

void FontCatalog::add(std::shared_ptr<const FontFace> face) {
  faces_[face->id()] = std::move(face);
}

std::vector<std::string> FontCatalog::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : faces_) out.push_back(id);
  return out;
}

FontCatalog::Resolved FontCatalog::resolve(const std::string& id) const {
  if (auto it = faces_.find(id); it != faces_.end()) return {it->second, false};
  if (!fallback_enabled_) throw Error("text.unknown_font", "font '" + id + "' is not in the catalog");
  auto it = faces_.find(kFallbackId);
  if (it == faces_.end()) throw Error("text.unknown_font", "catalog has no fallback face");
  return {it->second, true};
}

std::vector<std::string> split_words(const std::string& content) {
  std::vector<std::string> words;
  std::istringstream in(content);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::vector<std::string> balance_lines(const std::vector<std::string>& words, int line_count) {
  const int n = static_cast<int>(words.size());
  const int k = std::clamp(line_count, 1, std::max(n, 1));
  if (n == 0) return {};
  std::vector<long> prefix(n + 1, 0);
  for (int i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + static_cast<long>(words[i].size());
  auto width = [&](int i, int j) { return prefix[j] - prefix[i] + (j - i - 1); };  // words [i, j)

  struct Cost {
    long max_width = std::numeric_limits<long>::max();
    long sum_sq = std::numeric_limits<long>::max();
    bool operator<(const Cost& o) const {
      return max_width != o.max_width ? max_width < o.max_width : sum_sq < o.sum_sq;
    }
  };
  // best[l][j]: first j words in l lines; split[l][j]: start of the last line.
  std::vector<std::vector<Cost>> best(k + 1, std::vector<Cost>(n + 1));
  std::vector<std::vector<int>> split(k + 1, std::vector<int>(n + 1, -1));
  best[0][0] = {0, 0};
  for (int l = 1; l <= k; ++l) {
    for (int j = l; j <= n; ++j) {
      for (int i = l - 1; i < j; ++i) {
        const Cost& prev = best[l - 1][i];
        if (prev.max_width == std::numeric_limits<long>::max()) continue;
        const long w = width(i, j);
        const Cost cand{std::max(prev.max_width, w), prev.sum_sq + w * w};
        if (cand < best[l][j]) {
          best[l][j] = cand;
          split[l][j] = i;
        }
      }
    }
  }
  std::vector<std::string> lines(k);
  int end = n;
  for (int l = k; l >= 1; --l) {
    const int start = split[l][end];
    std::string line;
    for (int i = start; i < end; ++i) {
      if (i > start) line += ' ';
      line += words[i];
    }
    lines[l - 1] = std::move(line);
    end = start;
  }
  return lines;
}

LineLayout layout_lines(const TextLayer& spec, const FontCatalog& catalog) {
  const auto words = split_words(spec.content);
  if (words.empty()) throw Error("text.empty_content", "text layer content is empty");
  if (spec.box.empty()) throw Error("text.bad_box", "text box " + spec.box.to_string() + " is degenerate");
  const auto resolved = catalog.resolve(spec.font);

  LineLayout layout;
  layout.face = resolved.face;
  layout.font_fallback = resolved.fell_back;
  const int requested = std::max(spec.line_count, 1);
  const int count = std::min<int>(requested, static_cast<int>(words.size()));
  layout.line_count_clamped = requested > count || spec.line_count < 1;
  const auto texts = balance_lines(words, count);

  std::size_t widest = 0;
  for (const auto& t : texts) widest = std::max(widest, t.size());
  const FontFace& face = *layout.face;
  const double box_w = spec.box.width(), box_h = spec.box.height();
  auto fits = [&](int size) {
    return static_cast<double>(widest) * face.advance(size) <= box_w &&
           count * face.line_height(size) <= box_h;
  };
  int lo = kMinFontSize, hi = kMaxFontSize;
  if (!fits(lo)) {
    layout.overflow = true;
    layout.font_size = kMinFontSize;
  } else {
    while (lo < hi) {
      const int mid = lo + (hi - lo + 1) / 2;
      if (fits(mid)) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    layout.font_size = lo;
  }

  const double size = layout.font_size;
  const double lh = face.line_height(size);
  const double top = spec.box.y1 + (box_h - count * lh) / 2.0;
  for (int i = 0; i < count; ++i) {
    LaidOutLine line;
    line.text = texts[i];
    line.width = static_cast<double>(texts[i].size()) * face.advance(size);
    switch (spec.alignment) {
      case Alignment::left: line.x = spec.box.x1; break;
      case Alignment::center: line.x = spec.box.x1 + (box_w - line.width) / 2.0; break;
      case Alignment::right: line.x = spec.box.x2 - line.width; break;
    }
    line.baseline = top + i * lh + face.ascent(size);
    layout.lines.push_back(std::move(line));
  }
  return layout;
}

RenderedText rasterize_text(const TextLayer& spec, const LineLayout& layout, Canvas canvas) {
  if (!layout.face) throw Error("text.bad_layout", "layout has no resolved face");
  const FontFace& face = *layout.face;
  const double size = layout.font_size;
  const double adv = face.advance(size);
  const double cell_w = face.cell_width(size);
  const double scale_x = cell_w / kAtlasCellWidth;
  const double scale_y = size / kAtlasEm;

  // Unrotated coverage buffer aligned with the canvas pixel grid.
  double ex1 = spec.box.x1, ey1 = spec.box.y1, ex2 = spec.box.x2, ey2 = spec.box.y2;
  for (const auto& line : layout.lines) {
    ex1 = std::min(ex1, line.x);
    ex2 = std::max(ex2, line.x + std::max(line.width, cell_w));
    ey1 = std::min(ey1, line.baseline - face.ascent(size));
    ey2 = std::max(ey2, line.baseline - face.ascent(size) + face.line_height(size));
  }
  const int bx0 = static_cast<int>(std::floor(ex1)) - 1;
  const int by0 = static_cast<int>(std::floor(ey1)) - 1;
  const int bw = static_cast<int>(std::ceil(ex2)) + 1 - bx0;
  const int bh = static_cast<int>(std::ceil(ey2)) + 1 - by0;
  std::vector<double> buf(static_cast<std::size_t>(bw) * bh, 0.0);

  constexpr int kSub = 4;
  for (const auto& line : layout.lines) {
    const double cell_top = line.baseline - face.ascent(size);
    for (std::size_t i = 0; i < line.text.size(); ++i) {
      const auto ch = static_cast<unsigned char>(line.text[i]);
      if (ch == ' ') continue;
      const double cx = line.x + static_cast<double>(i) * adv;
      const int px1 = static_cast<int>(std::floor(cx)), px2 = static_cast<int>(std::ceil(cx + cell_w));
      const int py1 = static_cast<int>(std::floor(cell_top));
      const int py2 = static_cast<int>(std::ceil(cell_top + face.line_height(size)));
      for (int py = py1; py < py2; ++py) {
        for (int px = px1; px < px2; ++px) {
          double acc = 0.0;
          for (int sy = 0; sy < kSub; ++sy) {
            const double v = (py + (sy + 0.5) / kSub - cell_top) / scale_y;
            for (int sx = 0; sx < kSub; ++sx) {
              const double u = (px + (sx + 0.5) / kSub - cx) / scale_x;
              acc += face.coverage(ch, u, v);
            }
          }
          acc /= kSub * kSub;
          double& dst = buf[static_cast<std::size_t>(py - by0) * bw + (px - bx0)];
          dst = std::max(dst, acc);
        }
      }
    }
  }

  const int alpha_max = dequantize_color(spec.color.a);
  const Rgba ink{static_cast<std::uint8_t>(dequantize_color(spec.color.r)),
                 static_cast<std::uint8_t>(dequantize_color(spec.color.g)),
                 static_cast<std::uint8_t>(dequantize_color(spec.color.b)), 0};
  RenderedText out{RasterImage(canvas), false};
  auto put = [&](int x, int y, double cov) {
    const auto a = static_cast<int>(std::floor(cov * alpha_max + 0.5));
    if (a <= 0) return;
    Rgba p = ink;
    p.a = static_cast<std::uint8_t>(std::min(a, 255));
    out.image.at(x, y) = p;
  };

  const int angle = ((spec.angle % 360) + 360) % 360;
  if (angle == 0) {
    const BoundingBox hit = BoundingBox{bx0, by0, bx0 + bw, by0 + bh}.intersect({0, 0, canvas.width, canvas.height});
    if (hit.empty()) {
      out.out_of_bounds = true;
      return out;
    }
    for (int y = hit.y1; y < hit.y2; ++y) {
      for (int x = hit.x1; x < hit.x2; ++x) put(x, y, buf[static_cast<std::size_t>(y - by0) * bw + (x - bx0)]);
    }
    return out;
  }

  const double theta = spec.angle * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double ccx = (spec.box.x1 + spec.box.x2) / 2.0, ccy = (spec.box.y1 + spec.box.y2) / 2.0;
  // Forward map of the buffer corners bounds the pixels worth visiting.
  double rx1 = 1e18, ry1 = 1e18, rx2 = -1e18, ry2 = -1e18;
  for (double px : {static_cast<double>(bx0), static_cast<double>(bx0 + bw)}) {
    for (double py : {static_cast<double>(by0), static_cast<double>(by0 + bh)}) {
      const double dx = px - ccx, dy = py - ccy;
      const double qx = ccx + dx * c + dy * s;
      const double qy = ccy - dx * s + dy * c;
      rx1 = std::min(rx1, qx);
      ry1 = std::min(ry1, qy);
      rx2 = std::max(rx2, qx);
      ry2 = std::max(ry2, qy);
    }
  }
  const BoundingBox hit = BoundingBox{static_cast<int>(std::floor(rx1)) - 1, static_cast<int>(std::floor(ry1)) - 1,
                                      static_cast<int>(std::ceil(rx2)) + 1, static_cast<int>(std::ceil(ry2)) + 1}
                              .intersect({0, 0, canvas.width, canvas.height});
  if (hit.empty()) {
    out.out_of_bounds = true;
    return out;
  }
  auto sample = [&](double fx, double fy) {
    // fx, fy are continuous buffer coordinates of a pixel center.
    const double gx = fx - 0.5, gy = fy - 0.5;
    const int x0 = static_cast<int>(std::floor(gx)), y0 = static_cast<int>(std::floor(gy));
    const double tx = gx - x0, ty = gy - y0;
    auto at = [&](int x, int y) -> double {
      if (x < 0 || y < 0 || x >= bw || y >= bh) return 0.0;
      return buf[static_cast<std::size_t>(y) * bw + x];
    };
    const double top = at(x0, y0) * (1 - tx) + at(x0 + 1, y0) * tx;
    const double bottom = at(x0, y0 + 1) * (1 - tx) + at(x0 + 1, y0 + 1) * tx;
    return top * (1 - ty) + bottom * ty;
  };
  for (int y = hit.y1; y < hit.y2; ++y) {
    for (int x = hit.x1; x < hit.x2; ++x) {
      const double dx = x + 0.5 - ccx, dy = y + 0.5 - ccy;
      const double ux = ccx + dx * c - dy * s;
      const double uy = ccy + dx * s + dy * c;
      put(x, y, sample(ux - bx0, uy - by0));
    }
  }
  return out;
}

RasterImage render_text_layer(const TextLayer& spec, const FontCatalog& catalog, Canvas canvas) {
  return rasterize_text(spec, layout_lines(spec, catalog), canvas).image;
}

std::string to_svg(const TextLayer& spec, const LineLayout& layout) {
  char fill[8];
  std::snprintf(fill, sizeof fill, "#%02x%02x%02x", dequantize_color(spec.color.r), dequantize_color(spec.color.g),
                dequantize_color(spec.color.b));
  const double cx = (spec.box.x1 + spec.box.x2) / 2.0, cy = (spec.box.y1 + spec.box.y2) / 2.0;
  const char* anchor = spec.alignment == Alignment::left ? "start" : spec.alignment == Alignment::right ? "end" : "middle";

  std::ostringstream out;
  out << "<g data-content=\"" << xml_escape(spec.content) << "\" transform=\"rotate(" << -spec.angle << ' '
      << format_number(cx) << ' ' << format_number(cy) << ")\">";
  for (const auto& line : layout.lines) {
    double x = line.x;
    if (spec.alignment == Alignment::center) x = line.x + line.width / 2.0;
    if (spec.alignment == Alignment::right) x = line.x + line.width;
    out << "<text x=\"" << format_number(x) << "\" y=\"" << format_number(line.baseline) << "\" font-family=\""
        << xml_escape(spec.font) << "\" font-size=\"" << layout.font_size << "\" fill=\"" << fill
        << "\" fill-opacity=\"" << format_number(dequantize_color(spec.color.a) / 255.0) << "\" text-anchor=\""
        << anchor << "\">" << xml_escape(line.text) << "</text>";
  }
  out << "</g>";
  return out.str();
}

SvgTextInfo parse_svg_fragment(const std::string& fragment) {
  static const std::regex group_re(R"re(<g data-content="([^"]*)" transform="rotate\((-?\d+) )re");
  static const std::regex text_re(
      R"re(<text [^>]*fill="#([0-9a-fA-F]{6})" fill-opacity="([0-9.eE+-]+)"[^>]*>([^<]*)</text>)re");
  std::smatch m;
  if (!std::regex_search(fragment, m, group_re)) throw Error("svg.parse", "fragment has no text group");
  SvgTextInfo info;
  info.content = xml_unescape(m[1].str());
  info.angle = -std::stoi(m[2].str());
  for (auto it = std::sregex_iterator(fragment.begin(), fragment.end(), text_re); it != std::sregex_iterator(); ++it) {
    const auto& tm = *it;
    const unsigned long rgb = std::stoul(tm[1].str(), nullptr, 16);
    info.color.r = quantize_color(static_cast<int>((rgb >> 16) & 0xFF));
    info.color.g = quantize_color(static_cast<int>((rgb >> 8) & 0xFF));
    info.color.b = quantize_color(static_cast<int>(rgb & 0xFF));
    const double opacity = std::stod(tm[2].str());
    info.color.a = quantize_color(std::clamp(static_cast<int>(std::floor(opacity * 255.0 + 0.5)), 0, 255));
    info.lines.push_back(xml_unescape(tm[3].str()));
  }
  if (info.lines.empty()) throw Error("svg.parse", "fragment has no text elements");
  return info;
}

}  // namespace layerkit
