#include "layerkit/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "layerkit/codec.hpp"
#include "layerkit/gateway.hpp"
#include "layerkit/prompt_assets.hpp"
#include "layerkit/questionnaire.hpp"

namespace layerkit {

using nlohmann::json;

std::string_view to_string(BackgroundStyle s) noexcept {
  switch (s) {
    case BackgroundStyle::solid: return "solid";
    case BackgroundStyle::vertical_gradient: return "vertical gradient";
    case BackgroundStyle::horizontal_gradient: return "horizontal gradient";
    case BackgroundStyle::wave: return "wave";
  }
  return "solid";
}

namespace {

constexpr const char* kWords[] = {
    "SUMMER", "SALE",    "TODAY",   "FRESH",   "COFFEE",  "GRAND",  "OPENING", "MUSIC",   "FESTIVAL", "BOOK",
    "FAIR",   "SPRING",  "LIMITED", "OFFER",   "JOIN",    "US",     "NOW",     "WEEKEND", "MARKET",   "ART",
    "SHOW",   "NEW",     "FREE",    "ENTRY",   "CITY",    "RUN",    "2024",    "HAPPY",   "HOLIDAYS", "GARDEN",
    "PARTY",  "NIGHT",   "BAKERY",  "LIVE",    "JAZZ",    "DESIGN", "WEEK",    "SCHOOL",  "TRIP",     "BIG"};

constexpr const char* kFaces[] = {"mono-regular", "mono-condensed", "mono-wide", "mono-bold"};

// Plan-space spacing between elements and from the content edge.
constexpr int kGap = 10;
constexpr int kMargin = 8;

int sample_weighted(std::mt19937_64& rng, std::initializer_list<double> weights, int first) {
  std::discrete_distribution<int> d(weights);
  return first + d(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Rgba random_color(std::mt19937_64& rng) {
  return {static_cast<std::uint8_t>(uniform_int(rng, 0, 255)), static_cast<std::uint8_t>(uniform_int(rng, 0, 255)),
          static_cast<std::uint8_t>(uniform_int(rng, 0, 255)), 255};
}

std::uint8_t lerp8(int a, int b, double t) { return static_cast<std::uint8_t>(std::lround(a + (b - a) * t)); }

RasterImage make_background(Canvas canvas, BackgroundStyle style, std::mt19937_64& rng) {
  const Rgba c0 = random_color(rng), c1 = random_color(rng);
  RasterImage bg(canvas, c0);
  const double fx = std::uniform_real_distribution<double>(0.02, 0.06)(rng);
  const double fy = std::uniform_real_distribution<double>(0.02, 0.06)(rng);
  for (int y = 0; y < canvas.height; ++y) {
    for (int x = 0; x < canvas.width; ++x) {
      double t = 0;
      switch (style) {
        case BackgroundStyle::solid: continue;
        case BackgroundStyle::vertical_gradient: t = canvas.height > 1 ? double(y) / (canvas.height - 1) : 0; break;
        case BackgroundStyle::horizontal_gradient: t = canvas.width > 1 ? double(x) / (canvas.width - 1) : 0; break;
        case BackgroundStyle::wave: t = 0.5 + 0.5 * std::sin(fx * x) * std::cos(fy * y); break;
      }
      bg.at(x, y) = {lerp8(c0.r, c1.r, t), lerp8(c0.g, c1.g, t), lerp8(c0.b, c1.b, t), 255};
    }
  }
  return bg;
}

bool clear_of(const BoundingBox& b, const std::vector<BoundingBox>& placed) {
  for (const auto& p : placed) {
    if (!b.expanded(kGap).intersect(p).empty()) return false;
  }
  return true;
}

struct Slot {
  bool is_text;
  int min_w, max_w, min_h, max_h;
};

// Rejection sampling inside `area`; shrinks the size ranges when crowded and
// falls back to stacked bands.
std::vector<BoundingBox> place(const std::vector<Slot>& slots, const BoundingBox& area, std::mt19937_64& rng) {
  const BoundingBox inner = area.expanded(-kMargin);
  for (double scale = 1.0; scale > 0.3; scale *= 0.8) {
    std::vector<BoundingBox> placed;
    for (const auto& s : slots) {
      const int max_w = std::min(inner.width(), std::max(8, int(s.max_w * scale)));
      const int max_h = std::min(inner.height(), std::max(8, int(s.max_h * scale)));
      const int min_w = std::min(max_w, std::max(6, int(s.min_w * scale)));
      const int min_h = std::min(max_h, std::max(6, int(s.min_h * scale)));
      bool ok = false;
      for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
        const int w = uniform_int(rng, min_w, max_w), h = uniform_int(rng, min_h, max_h);
        const int x = uniform_int(rng, inner.x1, inner.x2 - w), y = uniform_int(rng, inner.y1, inner.y2 - h);
        const BoundingBox b{x, y, x + w, y + h};
        if (clear_of(b, placed)) {
          placed.push_back(b);
          ok = true;
        }
      }
      if (!ok) break;
    }
    if (placed.size() == slots.size()) return placed;
  }
  std::vector<BoundingBox> bands;
  const int n = static_cast<int>(slots.size());
  const int band = std::max(2, (inner.height() - (n - 1) * kGap) / std::max(1, n));
  for (int i = 0; i < n; ++i) {
    const int y = inner.y1 + i * (band + kGap);
    bands.push_back({inner.x1, y, inner.x2, y + band});
  }
  return bands;
}

double luminance(const Rgba& p) { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; }

double mean_luminance(const RasterImage& image, const BoundingBox& box) {
  double sum = 0;
  std::int64_t n = 0;
  for (int y = box.y1; y < box.y2; ++y) {
    for (int x = box.x1; x < box.x2; ++x) {
      sum += luminance(image.at(x, y));
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

ObjectLayer make_object(Canvas canvas, const BoundingBox& box, std::mt19937_64& rng) {
  ObjectLayer o;
  o.box = box;
  o.mask = Mask::from_box(canvas, box);
  o.image = RasterImage(canvas);
  const Rgba a = random_color(rng), b = random_color(rng);
  const int period = uniform_int(rng, 4, 12);
  const bool checker = uniform_int(rng, 0, 1) == 1;
  for (int y = box.y1; y < box.y2; ++y) {
    for (int x = box.x1; x < box.x2; ++x) {
      const int u = (x - box.x1) / period, v = (y - box.y1) / period;
      o.image.at(x, y) = ((checker ? u + v : u) % 2 == 0) ? a : b;
    }
  }
  return o;
}

std::string scramble(const std::string& s, std::mt19937_64& rng) {
  std::string out = s;
  for (char& c : out) {
    if (c != ' ') c = static_cast<char>('A' + uniform_int(rng, 0, 25));
  }
  return out;
}

}  // namespace

SyntheticDesign synth_design(const SyntheticDesignSpec& spec) {
  const Canvas canvas = spec.canvas;
  const int side = std::max(canvas.width, canvas.height);
  if (std::min(canvas.width, canvas.height) < 64 || side < kPlanSpace) {
    throw Error("datagen.canvas", "synthetic canvas needs a longer side >= 336 and a shorter side >= 64");
  }
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ull + 0x5851F42D4C957F2Dull);

  const BackgroundStyle style = spec.background.value_or(static_cast<BackgroundStyle>(uniform_int(rng, 0, 2)));
  const int n_objects = spec.object_count.value_or(sample_weighted(rng, {0.30, 0.45, 0.20, 0.04, 0.01}, 0));
  const int n_texts = spec.text_count.value_or(sample_weighted(rng, {0.10, 0.20, 0.30, 0.29, 0.11}, 1));
  if (n_objects < 0 || n_objects > 4) throw Error("datagen.spec", "object count must be in [0, 4]");
  if (n_texts < 1 || n_texts > 5) throw Error("datagen.spec", "text count must be in [1, 5]");

  const Canvas square{side, side};
  const int ox = (side - canvas.width) / 2, oy = (side - canvas.height) / 2;
  const BoundingBox content_plan = box_canvas_to_plan({ox, oy, ox + canvas.width, oy + canvas.height}, square);
  auto to_canvas = [&](const BoundingBox& p) { return box_plan_to_canvas(p, square).translated(-ox, -oy); };

  SyntheticDesign out;
  LayeredDesign& d = out.design;
  d.canvas = canvas;
  d.background = make_background(canvas, style, rng);

  std::vector<Slot> slots;
  for (int i = 0; i < n_objects; ++i) slots.push_back({false, 36, 100, 36, 100});
  for (int i = 0; i < n_texts; ++i) slots.push_back({true, 90, 220, 22, 56});
  const std::vector<BoundingBox> boxes = place(slots, content_plan, rng);

  for (int i = 0; i < n_objects; ++i) d.objects.push_back(make_object(canvas, to_canvas(boxes[i]), rng));

  const RasterImage base = composite_without_text(d);
  for (int i = 0; i < n_texts; ++i) {
    TextLayer t;
    t.box = to_canvas(boxes[n_objects + i]);
    const int words = uniform_int(rng, 1, 4);
    for (int w = 0; w < words; ++w) {
      if (w) t.content += ' ';
      t.content += kWords[uniform_int(rng, 0, static_cast<int>(std::size(kWords)) - 1)];
    }
    t.line_count = uniform_int(rng, 1, std::min(words, t.box.height() >= 2 * 16 ? 3 : 1));
    t.font = kFaces[uniform_int(rng, 0, 3)];
    t.alignment = static_cast<Alignment>(uniform_int(rng, 0, 2));
    t.angle = uniform_int(rng, 0, 9) == 0 ? 180 : 0;
    const bool light = mean_luminance(base, t.box) < 128;
    auto bin = [&] { return light ? uniform_int(rng, 21, 25) : uniform_int(rng, 0, 4); };
    t.color = {bin(), bin(), bin(), uniform_int(rng, 0, 9) == 0 ? uniform_int(rng, 18, 24) : kColorBins};
    d.texts.push_back(std::move(t));
  }
  validate_design(d);

  out.plan = plan_from_design(d);
  if (spec.nonsensical_glyphs) {
    LayeredDesign shown = d;
    for (auto& t : shown.texts) t.content = scramble(t.content, rng);
    out.reference = composite(shown);
  } else {
    out.reference = composite(d);
  }
  out.title = d.texts.front().content;
  out.description = "A graphic design titled \"" + out.title + "\" with " + std::to_string(n_texts) + " text " +
                    (n_texts == 1 ? "element" : "elements") + " and " + std::to_string(n_objects) +
                    " decorative shapes on a " + std::string(to_string(style)) + " background.";
  return out;
}

RasterImage MockInpainter::inpaint(const RasterImage& image, const Mask& mask, double strength, std::uint64_t seed) {
  if (mask.canvas() != image.canvas()) throw Error("datagen.mask_size", "inpainting mask does not match the image");
  RasterImage out = image;
  const BoundingBox bounds = mask.bounds();
  if (bounds.empty()) return out;
  std::mt19937_64 rng(seed);

  // Target: 4x4 blocks of the masked bounds shuffled, plus noise.
  constexpr int kBlock = 4;
  const int bw = (bounds.width() + kBlock - 1) / kBlock, bh = (bounds.height() + kBlock - 1) / kBlock;
  std::vector<int> order(static_cast<std::size_t>(bw) * bh);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> noise(-96, 96);
  for (int y = bounds.y1; y < bounds.y2; ++y) {
    for (int x = bounds.x1; x < bounds.x2; ++x) {
      const int bx = (x - bounds.x1) / kBlock, by = (y - bounds.y1) / kBlock;
      const int src_block = order[static_cast<std::size_t>(by) * bw + bx];
      const int sx = std::min(bounds.x2 - 1, bounds.x1 + (src_block % bw) * kBlock + (x - bounds.x1) % kBlock);
      const int sy = std::min(bounds.y2 - 1, bounds.y1 + (src_block / bw) * kBlock + (y - bounds.y1) % kBlock);
      const Rgba s = image.at(sx, sy);
      const int n = noise(rng);
      if (!mask.test(x, y)) continue;
      const Rgba o = image.at(x, y);
      auto mix = [&](int orig, int src) {
        const int target = std::clamp(src + n, 0, 255);
        return static_cast<std::uint8_t>(std::clamp<long>(std::lround(orig + strength * (target - orig)), 0, 255));
      };
      out.at(x, y) = {mix(o.r, s.r), mix(o.g, s.g), mix(o.b, s.b), o.a};
    }
  }
  return out;
}

Mask text_mask(const LayeredDesign& design, int margin) {
  Mask m(design.canvas);
  const BoundingBox whole{0, 0, design.canvas.width, design.canvas.height};
  for (const auto& t : design.texts) m = m.united(Mask::from_box(design.canvas, t.box.expanded(margin).intersect(whole)));
  return m;
}

RasterImage corrupt_text(const LayeredDesign& design, double strength, Inpainter& inpainter, std::mt19937_64& rng) {
  if (!(strength >= kMinCorruptStrength && strength <= kMaxCorruptStrength)) {
    throw Error("datagen.strength_range", "inpainting strength must be in [0.5, 0.7], got " + std::to_string(strength));
  }
  const RasterImage image = composite(design);
  const Mask mask = text_mask(design);
  const std::uint64_t seed = rng();
  if (!mask.any()) return image;
  return inpainter.inpaint(image, mask, strength, seed);
}

RasterImage strip_text(const LayeredDesign& design) { return composite_without_text(design); }

std::string_view to_string(SampleKind k) noexcept {
  switch (k) {
    case SampleKind::original: return "original";
    case SampleKind::nonsensical: return "nonsensical";
    case SampleKind::background: return "background";
    case SampleKind::questionnaire: return "questionnaire";
  }
  return "original";
}

std::optional<SampleKind> parse_sample_kind(std::string_view s) noexcept {
  for (SampleKind k : {SampleKind::original, SampleKind::nonsensical, SampleKind::background, SampleKind::questionnaire}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {
OcrResult truth_ocr(const DesignPlan& plan) {
  OcrResult r;
  for (const auto& e : plan.elements) {
    if (e.kind == ElementKind::text) r.items.push_back({e.content, e.box});
  }
  std::stable_sort(r.items.begin(), r.items.end(), [](const OcrItem& a, const OcrItem& b) {
    return a.box.y1 != b.box.y1 ? a.box.y1 < b.box.y1 : a.box.x1 < b.box.x1;
  });
  return r;
}
}  // namespace

Dataset build_dataset(const std::vector<SyntheticDesign>& designs, Gateway& gateway, Inpainter& inpainter,
                      std::uint64_t seed) {
  Dataset ds;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> strength(kMinCorruptStrength, kMaxCorruptStrength);
  for (const auto& sd : designs) {
    const std::string target = serialize_plan(sd.plan);
    const OcrResult ocr = truth_ocr(sd.plan);

    ds.samples.push_back({SampleKind::original, composite(sd.design),
                          build_stage2_prompt(PromptVariant::original, std::nullopt, ocr).text, target});

    OcrResult boxes = ocr;
    for (auto& item : boxes.items) item.text.reset();
    ds.samples.push_back({SampleKind::nonsensical, corrupt_text(sd.design, strength(rng), inpainter, rng),
                          build_stage2_prompt(PromptVariant::genai, sd.description, boxes).text, target});

    ds.samples.push_back({SampleKind::background, strip_text(sd.design),
                          build_stage2_prompt(PromptVariant::background, sd.description, std::nullopt).text, target});

    const RasterImage original = composite(sd.design);
    const Mask mask = text_mask(sd.design, kMaskDilation);
    const RemovalBatch batch = gateway.remove(original, mask, 4);
    const TrainingQuestionnaire tq =
        build_training_questionnaire(original, masked_view(original, mask), strip_text(sd.design),
                                     {batch.candidates[1], batch.candidates[2], batch.candidates[3]}, rng());
    ds.samples.push_back({SampleKind::questionnaire, tq.questionnaire.grid, std::string(assets::questionnaire),
                          std::string(1, tq.answer)});
  }
  return ds;
}

std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "images");
  std::string lines;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    char name[64];
    std::snprintf(name, sizeof name, "images/%06zu_%s.png", i, std::string(to_string(s.kind)).c_str());
    write_png(s.reference, dir / name);
    lines += json{{"kind", to_string(s.kind)}, {"reference_path", name}, {"prompt", s.prompt}, {"target", s.target}}.dump();
    lines += '\n';
  }
  const auto manifest = dir / "manifest.jsonl";
  write_text_file(manifest, lines);
  return manifest;
}

std::map<std::string, std::int64_t> count_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw Error("datagen.manifest", "cannot open " + manifest.string());
  std::map<std::string, std::int64_t> counts{{"total", 0}};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw Error("datagen.manifest", "line " + std::to_string(line_no) + " is not JSON");
    }
    const std::string kind = j.value("kind", std::string{});
    if (!parse_sample_kind(kind)) throw Error("datagen.manifest", "line " + std::to_string(line_no) + ": unknown kind");
    ++counts[kind];
    ++counts["total"];
  }
  return counts;
}

std::vector<Violation> check_manifest_counts(const std::map<std::string, std::int64_t>& counts, std::int64_t designs) {
  std::vector<Violation> v;
  auto get = [&](const std::string& k) {
    auto it = counts.find(k);
    return it == counts.end() ? std::int64_t{0} : it->second;
  };
  if (get("total") != expected_sample_count(designs)) {
    v.push_back({"datagen.count", "expected " + std::to_string(expected_sample_count(designs)) + " samples, found " +
                                      std::to_string(get("total"))});
  }
  for (SampleKind k : {SampleKind::original, SampleKind::nonsensical, SampleKind::background, SampleKind::questionnaire}) {
    const std::string name(to_string(k));
    if (get(name) != designs) {
      v.push_back({"datagen.count", name + ": expected " + std::to_string(designs) + ", found " + std::to_string(get(name))});
    }
  }
  return v;
}

}  // namespace layerkit
