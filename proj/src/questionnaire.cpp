#include "layerkit/questionnaire.hpp"

#include <algorithm>
#include <random>
#include <cctype>
#include <regex>

#include "layerkit/prompt_assets.hpp"
#include "layerkit/text_render.hpp"

namespace layerkit {

BoundingBox option_cell(int index) noexcept {
  const int col = index % 2, row = 1 + index / 2;
  return {col * kGridCell, row * kGridCell, (col + 1) * kGridCell, (row + 1) * kGridCell};
}

RasterImage masked_view(const RasterImage& image, const Mask& mask) { return paint_mask(image, mask, kMaskPaint); }

namespace {
void stamp_letter(RasterImage& grid, const BoundingBox& cell, char letter) {
  static const FontCatalog catalog = FontCatalog::builtin();
  const BoundingBox label{cell.x1, cell.y1, cell.x1 + kLabelSize, cell.y1 + kLabelSize};
  grid.fill_rect(label, {255, 255, 255, 255});
  TextLayer t;
  t.box = label;
  t.content = std::string(1, letter);
  t.color = {0, 0, 0, kColorBins};
  t.font = FontCatalog::kFallbackId;
  blend_over(grid, render_text_layer(t, catalog, grid.canvas()));
}

RasterImage cell_image(const RasterImage& image) {
  RasterImage out = resize_area(image, {kGridCell, kGridCell});
  for (auto& p : out.pixels()) p.a = 255;
  return out;
}
}  // namespace

Questionnaire compose_grid(const RasterImage& original, const RasterImage& masked, const std::vector<RasterImage>& candidates,
                           const std::array<std::string, 4>& provenance) {
  if (candidates.size() != 4) {
    throw Error("questionnaire.candidate_count", "a questionnaire needs exactly 4 candidates, got " +
                                                     std::to_string(candidates.size()));
  }
  if (original.empty() || masked.canvas() != original.canvas() ||
      std::any_of(candidates.begin(), candidates.end(), [&](const RasterImage& c) { return c.canvas() != original.canvas(); })) {
    throw Error("questionnaire.size_mismatch", "questionnaire inputs must share one canvas");
  }
  Questionnaire q;
  q.provenance = provenance;
  q.grid = RasterImage(kGridCanvas, {0, 0, 0, 255});
  q.grid.blit(cell_image(original), 0, 0);
  q.grid.blit(cell_image(masked), kGridCell, 0);
  for (int i = 0; i < 4; ++i) {
    const BoundingBox cell = option_cell(i);
    q.grid.blit(cell_image(candidates[i]), cell.x1, cell.y1);
    stamp_letter(q.grid, cell, kOptionLetters[i]);
  }
  return q;
}

int parse_selection(const std::string& reply) {
  static const std::regex letter(R"((^|[^A-Za-z])([abcdABCD])(?=[^A-Za-z]|$))");
  std::smatch m;
  if (!std::regex_search(reply, m, letter)) throw SelectionUnparsable(reply);
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(m[2].str()[0])));
  return c - 'a';
}

Selection select_best(const Questionnaire& q, Gateway& gateway) {
  Selection s;
  s.reply = gateway.vlm_complete(q.grid, std::string(assets::questionnaire), 16);
  s.index = parse_selection(s.reply);
  return s;
}

std::array<int, 4> shuffle_slots(std::uint64_t seed) {
  std::array<int, 4> p{0, 1, 2, 3};
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on the standard library.
  for (int i = 3; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

TrainingQuestionnaire build_training_questionnaire(const RasterImage& original, const RasterImage& masked,
                                                   const RasterImage& ground_truth,
                                                   const std::array<RasterImage, 3>& generated, std::uint64_t seed) {
  TrainingQuestionnaire out;
  out.permutation = shuffle_slots(seed);
  std::vector<RasterImage> slots;
  std::array<std::string, 4> provenance;
  for (int slot = 0; slot < 4; ++slot) {
    const int src = out.permutation[slot];
    slots.push_back(src == 0 ? ground_truth : generated[src - 1]);
    provenance[slot] = src == 0 ? "ground_truth" : "generated:" + std::to_string(src);
    if (src == 0) out.answer = kOptionLetters[slot];
  }
  out.questionnaire = compose_grid(original, masked, slots, provenance);
  return out;
}

double mean_squared_error(const RasterImage& a, const RasterImage& b) {
  if (a.canvas() != b.canvas()) throw Error("metrics.size_mismatch", "images differ in size");
  if (a.empty()) return 0.0;
  double sum = 0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double dr = pa[i].r - pb[i].r, dg = pa[i].g - pb[i].g, db = pa[i].b - pb[i].b;
    sum += dr * dr + dg * dg + db * db;
  }
  return sum / (3.0 * static_cast<double>(pa.size()));
}

int oracle_select(const std::vector<RasterImage>& candidates, const RasterImage& ground_truth) {
  if (candidates.empty()) throw Error("questionnaire.candidate_count", "no candidates to select from");
  int best = 0;
  double best_err = mean_squared_error(candidates[0], ground_truth);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double e = mean_squared_error(candidates[i], ground_truth);
    if (e < best_err) {
      best_err = e;
      best = static_cast<int>(i);
    }
  }
  return best;
}

Selection QuestionnaireSelector::choose(const RasterImage& image, const Mask& mask, const RemovalBatch& batch, int) {
  if (batch.candidates.size() != 4) return {0, "", true};
  const Questionnaire q = compose_grid(image, masked_view(image, mask), batch.candidates);
  try {
    return select_best(q, gateway_);
  } catch (const SelectionUnparsable& e) {
    return {0, e.what(), true};
  }
}

Selection OracleSelector::choose(const RasterImage&, const Mask&, const RemovalBatch& batch, int step) {
  const auto truth = truth_ ? truth_(step) : std::nullopt;
  if (!truth) return {0, "", true};
  return {oracle_select(batch.candidates, *truth), "", false};
}

}  // namespace layerkit
