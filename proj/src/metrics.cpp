#include "layerkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"

namespace layerkit {

using nlohmann::json;

namespace {

std::u32string code_points(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    char32_t cp = len == 1 ? c : c & (0x7F >> len);
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

}  // namespace

std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::u32string x = code_points(a), y = code_points(b);
  std::vector<std::size_t> prev(y.size() + 1), cur(y.size() + 1);
  for (std::size_t j = 0; j <= y.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= x.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= y.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x[i - 1] == y[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[y.size()];
}

double ned_similarity(std::string_view a, std::string_view b) {
  const std::size_t n = std::max(code_points(a).size(), code_points(b).size());
  if (n == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(n);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const std::int64_t inter = a.intersect(b).area();
  const std::int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double mask_iou(const Mask& a, const Mask& b) {
  const std::int64_t inter = a.intersected(b).area();
  const std::int64_t uni = a.united(b).area();
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
}

DetectionScore detection_f1(const std::vector<BoundingBox>& pred, const std::vector<BoundingBox>& gt, double threshold) {
  std::vector<std::tuple<double, int, int>> pairs;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
    for (int g = 0; g < static_cast<int>(gt.size()); ++g) {
      const double v = iou(pred[p], gt[g]);
      if (v >= threshold && v > 0) pairs.emplace_back(v, p, g);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  std::vector<char> used_p(pred.size(), 0), used_g(gt.size(), 0);
  DetectionScore s;
  for (const auto& [v, p, g] : pairs) {
    if (used_p[p] || used_g[g]) continue;
    used_p[p] = used_g[g] = 1;
    s.matches.emplace_back(p, g);
  }
  s.tp = static_cast<int>(s.matches.size());
  s.fp = static_cast<int>(pred.size()) - s.tp;
  s.fn = static_cast<int>(gt.size()) - s.tp;
  if (pred.empty() && gt.empty()) return s;
  s.precision = pred.empty() ? 0.0 : double(s.tp) / double(pred.size());
  s.recall = gt.empty() ? 0.0 : double(s.tp) / double(gt.size());
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

namespace {
std::vector<const PlanElement*> of_kind(const DesignPlan& plan, ElementKind kind) {
  std::vector<const PlanElement*> out;
  for (const auto& e : plan.elements) {
    if (e.kind == kind) out.push_back(&e);
  }
  return out;
}

std::vector<BoundingBox> boxes(const std::vector<const PlanElement*>& els) {
  std::vector<BoundingBox> out;
  for (const auto* e : els) out.push_back(e->box);
  return out;
}
}  // namespace

AttributeAccuracy attribute_accuracy(const DesignPlan& pred, const DesignPlan& gt, double threshold) {
  const auto p = of_kind(pred, ElementKind::text), g = of_kind(gt, ElementKind::text);
  const DetectionScore det = detection_f1(boxes(p), boxes(g), threshold);
  AttributeAccuracy a;
  for (const auto& [pi, gi] : det.matches) {
    const PlanElement& x = *p[pi];
    const PlanElement& y = *g[gi];
    ++a.pairs;
    a.color += x.color == y.color;
    a.font += x.font == y.font;
    a.alignment += x.alignment == y.alignment;
    a.lines += x.lines == y.lines;
    a.angle += x.angle == y.angle;
    a.ned_sum += ned_similarity(x.content, y.content);
  }
  return a;
}

double layer_count_l1(const std::vector<int>& preds, const std::vector<int>& gts) {
  if (preds.size() != gts.size()) throw Error("metrics.length_mismatch", "count vectors differ in length");
  if (preds.empty()) return 0.0;
  double sum = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) sum += std::abs(preds[i] - gts[i]);
  return sum / static_cast<double>(preds.size());
}

double psnr(const RasterImage& a, const RasterImage& b) {
  if (a.canvas() != b.canvas()) throw Error("metrics.size_mismatch", "PSNR needs images of equal size");
  if (a.empty()) return kPsnrCap;
  double sum = 0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double dr = pa[i].r - pb[i].r, dg = pa[i].g - pb[i].g, db = pa[i].b - pb[i].b;
    sum += dr * dr + dg * dg + db * db;
  }
  const double mse = sum / (3.0 * static_cast<double>(pa.size()));
  if (mse == 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

SampleEval evaluate_sample(const std::string& id, const DesignPlan& pred, const DesignPlan& gt,
                           const RasterImage* pred_background, const RasterImage* gt_background) {
  SampleEval s;
  s.id = id;
  const auto pt = of_kind(pred, ElementKind::text), gt_t = of_kind(gt, ElementKind::text);
  const auto po = of_kind(pred, ElementKind::object), go = of_kind(gt, ElementKind::object);
  s.text = detection_f1(boxes(pt), boxes(gt_t));
  s.object = detection_f1(boxes(po), boxes(go));
  s.attributes = attribute_accuracy(pred, gt);
  s.pred_texts = static_cast<int>(pt.size());
  s.gt_texts = static_cast<int>(gt_t.size());
  s.pred_objects = static_cast<int>(po.size());
  s.gt_objects = static_cast<int>(go.size());
  if (pred_background && gt_background && pred_background->canvas() == gt_background->canvas()) {
    s.background_psnr = psnr(*pred_background, *gt_background);
  }
  return s;
}

std::map<std::string, double> EvalReport::summary() const {
  std::map<std::string, double> m;
  auto f1 = [](int tp, int fp, int fn) {
    if (tp + fp + fn == 0) return 1.0;
    const double p = tp + fp ? double(tp) / (tp + fp) : 0.0, r = tp + fn ? double(tp) / (tp + fn) : 0.0;
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  };
  int ttp = 0, tfp = 0, tfn = 0, otp = 0, ofp = 0, ofn = 0;
  AttributeAccuracy total;
  std::vector<int> pt, gt, po, go;
  std::vector<double> psnrs;
  for (const auto& s : samples) {
    ttp += s.text.tp, tfp += s.text.fp, tfn += s.text.fn;
    otp += s.object.tp, ofp += s.object.fp, ofn += s.object.fn;
    total.pairs += s.attributes.pairs;
    total.color += s.attributes.color;
    total.font += s.attributes.font;
    total.alignment += s.attributes.alignment;
    total.lines += s.attributes.lines;
    total.angle += s.attributes.angle;
    total.ned_sum += s.attributes.ned_sum;
    pt.push_back(s.pred_texts), gt.push_back(s.gt_texts), po.push_back(s.pred_objects), go.push_back(s.gt_objects);
    if (s.background_psnr) psnrs.push_back(*s.background_psnr);
  }
  m["samples"] = static_cast<double>(samples.size());
  m["text_detection_f1"] = f1(ttp, tfp, tfn);
  m["object_detection_f1"] = f1(otp, ofp, ofn);
  m["text_recognition_ned"] = total.mean_ned();
  m["color_accuracy"] = total.rate(total.color);
  m["font_accuracy"] = total.rate(total.font);
  m["alignment_accuracy"] = total.rate(total.alignment);
  m["line_accuracy"] = total.rate(total.lines);
  m["angle_accuracy"] = total.rate(total.angle);
  m["text_layer_l1"] = layer_count_l1(pt, gt);
  m["object_layer_l1"] = layer_count_l1(po, go);
  if (!psnrs.empty()) {
    double sum = 0;
    for (double v : psnrs) sum += v;
    m["background_psnr_mean"] = sum / psnrs.size();
    m["background_psnr_min"] = *std::min_element(psnrs.begin(), psnrs.end());
    m["background_psnr_max"] = *std::max_element(psnrs.begin(), psnrs.end());
  }
  return m;
}

json EvalReport::to_json() const {
  json rows = json::array();
  for (const auto& s : samples) {
    rows.push_back({{"id", s.id},
                    {"missing_prediction", s.missing_prediction},
                    {"text_f1", s.text.f1},
                    {"object_f1", s.object.f1},
                    {"matched_texts", s.attributes.pairs},
                    {"pred_texts", s.pred_texts},
                    {"gt_texts", s.gt_texts},
                    {"pred_objects", s.pred_objects},
                    {"gt_objects", s.gt_objects},
                    {"count_mismatch", s.pred_texts != s.gt_texts || s.pred_objects != s.gt_objects},
                    {"background_psnr", s.background_psnr ? json(*s.background_psnr) : json(nullptr)}});
  }
  return {{"summary", summary()}, {"samples", rows}};
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "id,missing_prediction,text_f1,object_f1,matched_texts,pred_texts,gt_texts,pred_objects,gt_objects,background_psnr\n";
  for (const auto& s : samples) {
    out << s.id << ',' << (s.missing_prediction ? 1 : 0) << ',' << s.text.f1 << ',' << s.object.f1 << ','
        << s.attributes.pairs << ',' << s.pred_texts << ',' << s.gt_texts << ',' << s.pred_objects << ','
        << s.gt_objects << ',';
    if (s.background_psnr) out << *s.background_psnr;
    out << '\n';
  }
  return out.str();
}

namespace {

struct Loaded {
  DesignPlan plan;
  std::optional<RasterImage> background;
};

bool is_sample_dir(const std::filesystem::path& p) {
  return std::filesystem::exists(p / kManifestName) || std::filesystem::exists(p / "plan.json");
}

Loaded load_sample(const std::filesystem::path& dir) {
  Loaded out;
  std::optional<LayeredDesign> design;
  if (std::filesystem::exists(dir / kManifestName)) design = load_bundle(dir);
  if (std::filesystem::exists(dir / "plan.json")) {
    out.plan = parse_plan(read_text_file(dir / "plan.json")).plan;
  } else {
    out.plan = plan_from_design(*design);
  }
  if (design) out.background = design->background;
  return out;
}

std::map<std::string, std::filesystem::path> samples_in(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw Error("eval.usage", root.string() + " is not a directory");
  std::map<std::string, std::filesystem::path> out;
  if (is_sample_dir(root)) {
    out[root.filename().string()] = root;
    return out;
  }
  for (const auto& entry : std::filesystem::directory_iterator(root)) {
    if (entry.is_directory() && is_sample_dir(entry.path())) out[entry.path().filename().string()] = entry.path();
  }
  return out;
}

}  // namespace

EvalReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir) {
  auto preds = samples_in(pred_dir);
  auto gts = samples_in(gt_dir);
  if (gts.empty()) throw Error("eval.usage", "no ground-truth samples under " + gt_dir.string());
  if (preds.empty()) throw Error("eval.usage", "no predicted samples under " + pred_dir.string());
  // A single bundle on each side pairs up regardless of directory names.
  if (preds.size() == 1 && gts.size() == 1 && is_sample_dir(pred_dir) && is_sample_dir(gt_dir)) {
    preds = {{gts.begin()->first, preds.begin()->second}};
  }
  EvalReport report;
  for (const auto& [id, gpath] : gts) {
    const Loaded g = load_sample(gpath);
    auto it = preds.find(id);
    if (it == preds.end()) {
      DesignPlan empty;
      SampleEval s = evaluate_sample(id, empty, g.plan);
      s.missing_prediction = true;
      report.samples.push_back(std::move(s));
      continue;
    }
    const Loaded p = load_sample(it->second);
    report.samples.push_back(evaluate_sample(id, p.plan, g.plan, p.background ? &*p.background : nullptr,
                                             g.background ? &*g.background : nullptr));
  }
  return report;
}

}  // namespace layerkit
