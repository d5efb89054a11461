#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "layerkit/image.hpp"
#include "layerkit/plan.hpp"

namespace layerkit {

/// Levenshtein distance over Unicode code points (UTF-8 input).
std::size_t edit_distance(std::string_view a, std::string_view b);

/// 1 - edit / max length; two empty strings score 1.
double ned_similarity(std::string_view a, std::string_view b);

double iou(const BoundingBox& a, const BoundingBox& b);
double mask_iou(const Mask& a, const Mask& b);

inline constexpr double kDefaultIouThreshold = 0.5;

struct DetectionScore {
  int tp = 0;
  int fp = 0;
  int fn = 0;
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  /// (pred index, gt index) of every match.
  std::vector<std::pair<int, int>> matches;
};

/// Greedy one-to-one matching by descending IoU (ties: lower pred index,
/// then lower gt index); pairs below `threshold` never match.
DetectionScore detection_f1(const std::vector<BoundingBox>& pred, const std::vector<BoundingBox>& gt,
                            double threshold = kDefaultIouThreshold);

/// Text attributes over detection-matched pairs. With no pairs every rate is 1.
struct AttributeAccuracy {
  int pairs = 0;
  int color = 0;
  int font = 0;
  int alignment = 0;
  int lines = 0;
  int angle = 0;
  double ned_sum = 0;

  double rate(int correct) const noexcept { return pairs ? double(correct) / pairs : 1.0; }
  double mean_ned() const noexcept { return pairs ? ned_sum / pairs : 1.0; }
};

AttributeAccuracy attribute_accuracy(const DesignPlan& pred, const DesignPlan& gt, double threshold = kDefaultIouThreshold);

/// Mean |pred - gt|; raises Error("metrics.length_mismatch") on unequal lengths.
double layer_count_l1(const std::vector<int>& preds, const std::vector<int>& gts);

inline constexpr double kPsnrCap = 99.0;

/// PSNR over RGB, capped at 99 dB (identical images report the cap).
double psnr(const RasterImage& a, const RasterImage& b);

struct SampleEval {
  std::string id;
  bool missing_prediction = false;
  DetectionScore text;
  DetectionScore object;
  AttributeAccuracy attributes;
  int pred_texts = 0;
  int gt_texts = 0;
  int pred_objects = 0;
  int gt_objects = 0;
  std::optional<double> background_psnr;
};

struct EvalReport {
  std::vector<SampleEval> samples;

  /// Corpus-level scalars: micro-averaged detection and attribute rates,
  /// layer-count L1 and background PSNR statistics.
  std::map<std::string, double> summary() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

SampleEval evaluate_sample(const std::string& id, const DesignPlan& pred, const DesignPlan& gt,
                           const RasterImage* pred_background = nullptr, const RasterImage* gt_background = nullptr);

/// Each directory holds either one bundle or one sub-directory per sample
/// (a bundle or a plan.json). Samples pair up by name.
EvalReport evaluate_dirs(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir);

}  // namespace layerkit
