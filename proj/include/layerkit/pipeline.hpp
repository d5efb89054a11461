#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "layerkit/design.hpp"
#include "layerkit/gateway.hpp"
#include "layerkit/plan.hpp"
#include "layerkit/questionnaire.hpp"

namespace layerkit {

enum class PipelineMode { from_intention, from_sketch, from_reference, add_text_to_background, derender };

std::string_view to_string(PipelineMode m) noexcept;
std::optional<PipelineMode> parse_pipeline_mode(std::string_view s) noexcept;

struct PipelineRequest {
  PipelineMode mode = PipelineMode::from_intention;
  std::optional<std::string> intention;
  std::optional<RasterImage> sketch;
  /// Reference image, or the background for add_text_to_background.
  std::optional<RasterImage> reference;
  /// Caption for the plan prompt; defaults to the intention, then to a generic caption.
  std::optional<std::string> description;
  std::uint64_t seed = 0;
  /// Output canvas for generated references.
  Canvas canvas = kWorkingCanvas;
};

/// Inputs demanded by each mode; violations are itemized.
std::vector<Violation> check_request(const PipelineRequest& request);

struct RemovalStep {
  std::string label;   // "text" or "object"
  int plan_index = -1; // plan element removed; -1 for the text union
  RasterImage input;
  Mask mask;
  std::vector<RasterImage> candidates;
  Selection selection;
};

/// Append-only record of one run.
struct PipelineTrace {
  std::string mode;
  std::uint64_t seed = 0;
  std::vector<std::string> stages;
  std::optional<std::string> expanded_prompt;
  std::optional<RasterImage> reference;
  std::optional<PadRecord> pad;
  std::optional<OcrResult> ocr;
  std::optional<std::string> plan_prompt;
  std::optional<std::string> raw_plan;
  std::vector<std::string> repairs;
  std::vector<RemovalStep> removals;
  std::vector<std::string> notes;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, double>> timings_ms;

  nlohmann::json to_json(bool include_timings = true) const;
  /// trace.json (without timings), reference.png, step_<k>_{mask,grid}.png
  /// and, on request, timings.json. Everything but timings.json is a pure
  /// function of the inputs and seed.
  void save(const std::filesystem::path& dir, bool with_timings = false) const;
};

/// Carries the partial trace of a failed run.
class PipelineError : public Error {
 public:
  PipelineError(const Error& cause, PipelineTrace trace)
      : Error(cause.code(), cause.what()), trace_(std::move(trace)) {}
  const PipelineTrace& trace() const noexcept { return trace_; }

 private:
  PipelineTrace trace_;
};

inline constexpr const char* kDefaultDescription = "A graphic design.";

std::string expand_intention(const std::string& intention, Gateway& gateway);
std::string describe_sketch(const std::optional<RasterImage>& sketch, const std::string& intention, Gateway& gateway);

/// T2I at 1024 on the longer side, downscaled to `canvas`.
RasterImage create_reference(const std::string& prompt, Gateway& gateway, Canvas canvas = kWorkingCanvas);

struct PlanOutcome {
  DesignPlan plan;
  std::vector<std::string> repairs;
  std::string raw_text;
  std::string prompt;
  std::optional<OcrResult> ocr;
  /// Set when the reference had to be padded to a square.
  std::optional<PadRecord> pad;
};

/// OCR -> combined prompt -> VLM -> parse. Boxes refer to the padded square.
PlanOutcome plan_design(const RasterImage& reference, const std::optional<std::string>& description, Gateway& gateway,
                        PromptVariant variant);

/// Text removal, then top-to-bottom object extraction on a square reference.
LayeredDesign extract_layers(const RasterImage& reference, const DesignPlan& plan, Gateway& gateway, Selector& selector,
                             PipelineTrace* trace = nullptr);

struct PipelineResult {
  LayeredDesign design;
  DesignPlan plan;
  PipelineTrace trace;
};

/// Uses a QuestionnaireSelector over `gateway` when no selector is given.
PipelineResult run(const PipelineRequest& request, Gateway& gateway, Selector* selector = nullptr);

}  // namespace layerkit
