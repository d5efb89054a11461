#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "layerkit/design.hpp"
#include "layerkit/error.hpp"
#include "layerkit/quant.hpp"

namespace layerkit {

enum class ElementKind { background, object, text };

std::string_view to_string(ElementKind k) noexcept;

/// One element record of the plan language. Boxes are in plan space
/// [0, 336]. The text attributes are meaningful only for kind == text and
/// stay at their defaults otherwise.
struct PlanElement {
  ElementKind kind = ElementKind::background;
  BoundingBox box{0, 0, kPlanSpace, kPlanSpace};
  std::string content;
  QuantColor color;
  std::string font;
  Alignment alignment = Alignment::center;
  int lines = 1;
  int angle = 0;

  bool operator==(const PlanElement&) const = default;
};

/// Elements bottom-to-top: one background first, then objects, then texts.
struct DesignPlan {
  std::vector<PlanElement> elements;

  std::size_t count(ElementKind kind) const noexcept;
  bool operator==(const DesignPlan&) const = default;
};

/// Raised by parse_plan. `raw_text()` carries the model output for diagnosis.
class PlanParseError : public Error {
 public:
  PlanParseError(std::string code, const std::string& message, std::string raw_text,
                 std::vector<Violation> violations = {})
      : Error(std::move(code), message), raw_text_(std::move(raw_text)), violations_(std::move(violations)) {}

  const std::string& raw_text() const noexcept { return raw_text_; }
  const std::vector<Violation>& violations() const noexcept { return violations_; }

 private:
  std::string raw_text_;
  std::vector<Violation> violations_;
};

std::vector<Violation> check_plan(const DesignPlan& plan);

struct ParsedPlan {
  DesignPlan plan;
  /// Repair kinds applied, in order: strip_code_fence, extract_array,
  /// single_quotes, tuple_to_array, trailing_comma.
  std::vector<std::string> repairs;
};

ParsedPlan parse_plan(std::string_view text);

/// Canonical form: one key-sorted JSON object per line inside an array.
std::string serialize_plan(const DesignPlan& plan);

/// Maximum plan-model output, in estimated tokens.
inline constexpr int kMaxPlanTokens = 1536;

/// chars / 4, rounded up.
int estimate_tokens(std::string_view text) noexcept;

struct SerializedPlan {
  std::string text;
  int token_estimate = 0;
  bool over_budget = false;
};
SerializedPlan serialize_plan_checked(const DesignPlan& plan);

struct OcrItem {
  std::optional<std::string> text;
  BoundingBox box;  // plan space

  bool operator==(const OcrItem&) const = default;
};

struct OcrResult {
  std::vector<OcrItem> items;

  bool operator==(const OcrResult&) const = default;
};

enum class PromptVariant { genai, original, background };

std::string_view to_string(PromptVariant v) noexcept;
std::optional<PromptVariant> parse_prompt_variant(std::string_view s) noexcept;

struct Stage2Prompt {
  std::string text;
  bool empty_ocr = false;
};

/// Task description + description + OCR string for the chosen variant.
Stage2Prompt build_stage2_prompt(PromptVariant variant, const std::optional<std::string>& description,
                                 const std::optional<OcrResult>& ocr);

/// OCR string rendering: `[[(x1, y1, x2, y2)], ...]` or `[['TEXT', (x1, y1, x2, y2)], ...]`.
std::string format_ocr_boxes(const OcrResult& ocr);
std::string format_ocr_with_text(const OcrResult& ocr);

/// Python-style repr of a string literal.
std::string python_repr(std::string_view s);

/// Plan <-> document conversions. A non-square canvas is treated as centered
/// inside its padded square, matching pad_to_square.
TextLayer text_layer_from_plan(const PlanElement& element, Canvas square);
DesignPlan plan_from_design(const LayeredDesign& design);

}  // namespace layerkit
