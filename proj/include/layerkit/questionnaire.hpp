#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "layerkit/error.hpp"
#include "layerkit/gateway.hpp"
#include "layerkit/image.hpp"

namespace layerkit {

inline constexpr int kGridCell = 256;
inline constexpr Canvas kGridCanvas{2 * kGridCell, 3 * kGridCell};
inline constexpr int kLabelSize = 16;
inline constexpr std::array<char, 4> kOptionLetters{'a', 'b', 'c', 'd'};
/// Fill used for the removal region in the "masked" cell.
inline constexpr Rgba kMaskPaint{255, 255, 255, 255};

/// Row 1: original | masked. Rows 2-3: options a b / c d.
struct Questionnaire {
  RasterImage grid;
  std::array<char, 4> labels = kOptionLetters;
  /// Source of each option: "candidate:<k>" or "ground_truth".
  std::array<std::string, 4> provenance;
};

/// Grid cell holding option `index` (0..3).
BoundingBox option_cell(int index) noexcept;

RasterImage masked_view(const RasterImage& image, const Mask& mask);

/// Raises Error("questionnaire.candidate_count") unless exactly 4 candidates
/// and Error("questionnaire.size_mismatch") unless all share the original's canvas.
Questionnaire compose_grid(const RasterImage& original, const RasterImage& masked, const std::vector<RasterImage>& candidates,
                           const std::array<std::string, 4>& provenance = {"candidate:0", "candidate:1", "candidate:2",
                                                                           "candidate:3"});

class SelectionUnparsable : public Error {
 public:
  explicit SelectionUnparsable(const std::string& reply)
      : Error("questionnaire.unparsable", "no option letter in reply: " + reply.substr(0, 120)) {}
};

/// First standalone a/b/c/d, case-insensitive.
int parse_selection(const std::string& reply);

struct Selection {
  int index = 0;
  std::string reply;
  bool fell_back = false;
};

/// Asks the VLM. Raises SelectionUnparsable on an unusable reply.
Selection select_best(const Questionnaire& q, Gateway& gateway);

struct TrainingQuestionnaire {
  Questionnaire questionnaire;
  char answer = 'a';
  /// permutation[slot] = source, where source 0 is the ground truth and 1..3 the generated results.
  std::array<int, 4> permutation{0, 1, 2, 3};
};

/// Seeded shuffle of {ground truth, g1, g2, g3} into slots a..d.
std::array<int, 4> shuffle_slots(std::uint64_t seed);
TrainingQuestionnaire build_training_questionnaire(const RasterImage& original, const RasterImage& masked,
                                                   const RasterImage& ground_truth,
                                                   const std::array<RasterImage, 3>& generated, std::uint64_t seed);

double mean_squared_error(const RasterImage& a, const RasterImage& b);

/// argmin MSE against the ground truth; ties go to the lowest index.
int oracle_select(const std::vector<RasterImage>& candidates, const RasterImage& ground_truth);

/// Chooses one removal candidate per step.
class Selector {
 public:
  virtual ~Selector() = default;
  virtual Selection choose(const RasterImage& image, const Mask& mask, const RemovalBatch& batch, int step) = 0;
};

class FirstCandidateSelector : public Selector {
 public:
  Selection choose(const RasterImage&, const Mask&, const RemovalBatch&, int) override { return {}; }
};

/// Questionnaire round trip through the VLM; falls back to candidate 0 when
/// the reply has no option letter or the batch is not exactly four.
class QuestionnaireSelector : public Selector {
 public:
  explicit QuestionnaireSelector(Gateway& gateway) : gateway_(gateway) {}
  Selection choose(const RasterImage& image, const Mask& mask, const RemovalBatch& batch, int step) override;

 private:
  Gateway& gateway_;
};

/// Test oracle: compares candidates with a known truth for each step.
class OracleSelector : public Selector {
 public:
  using TruthFn = std::function<std::optional<RasterImage>(int step)>;
  explicit OracleSelector(TruthFn truth) : truth_(std::move(truth)) {}
  Selection choose(const RasterImage& image, const Mask& mask, const RemovalBatch& batch, int step) override;

 private:
  TruthFn truth_;
};

}  // namespace layerkit
