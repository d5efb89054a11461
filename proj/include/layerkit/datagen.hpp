#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "layerkit/design.hpp"
#include "layerkit/plan.hpp"

namespace layerkit {

class Gateway;

enum class BackgroundStyle { solid, vertical_gradient, horizontal_gradient, wave };

std::string_view to_string(BackgroundStyle s) noexcept;

/// Unset fields are drawn from the seed: objects 0..4 (mean ~1.02), texts
/// 1..5 (mean ~3.11), background style among the three linear ones.
struct SyntheticDesignSpec {
  std::uint64_t seed = 0;
  Canvas canvas = kWorkingCanvas;
  std::optional<BackgroundStyle> background;
  std::optional<int> object_count;
  std::optional<int> text_count;
  /// Render texts as scrambled letters, as generative models tend to do.
  bool nonsensical_glyphs = false;
};

struct SyntheticDesign {
  LayeredDesign design;
  /// Exact plan of `design`; non-square canvases are expressed in the padded square.
  DesignPlan plan;
  /// Raster reference: composite of `design` (with scrambled glyphs when requested).
  RasterImage reference;
  std::string title;
  std::string description;
};

/// Elements sit on the plan grid, never overlap and keep a clear gap, so
/// every canvas box maps to plan space and back exactly.
SyntheticDesign synth_design(const SyntheticDesignSpec& spec);

/// Inpainting model used to produce nonsensical-text references.
class Inpainter {
 public:
  virtual ~Inpainter() = default;
  virtual RasterImage inpaint(const RasterImage& image, const Mask& mask, double strength, std::uint64_t seed) = 0;
};

/// Scrambles 4x4 blocks and adds noise inside the mask, then blends toward
/// that target by `strength`. Pixels outside the mask are untouched.
class MockInpainter : public Inpainter {
 public:
  RasterImage inpaint(const RasterImage& image, const Mask& mask, double strength, std::uint64_t seed) override;
};

inline constexpr double kMinCorruptStrength = 0.5;
inline constexpr double kMaxCorruptStrength = 0.7;

/// Composite with the text regions re-inpainted. Raises
/// Error("datagen.strength_range") outside [0.5, 0.7].
RasterImage corrupt_text(const LayeredDesign& design, double strength, Inpainter& inpainter, std::mt19937_64& rng);

/// Background plus objects.
RasterImage strip_text(const LayeredDesign& design);

/// Union of all text boxes, dilated by `margin` and clipped to the canvas.
Mask text_mask(const LayeredDesign& design, int margin = 0);

enum class SampleKind { original, nonsensical, background, questionnaire };

std::string_view to_string(SampleKind k) noexcept;
std::optional<SampleKind> parse_sample_kind(std::string_view s) noexcept;

struct TrainingSample {
  SampleKind kind = SampleKind::original;
  RasterImage reference;
  std::string prompt;
  /// Canonical plan text, or the answer letter for questionnaire samples.
  std::string target;
};

struct Dataset {
  std::vector<TrainingSample> samples;
};

inline constexpr int kSamplesPerDesign = 4;

constexpr std::int64_t expected_sample_count(std::int64_t designs) noexcept { return kSamplesPerDesign * designs; }

/// Four samples per design in kind order original, nonsensical, background,
/// questionnaire. Removal candidates for the questionnaire come from `gateway`.
Dataset build_dataset(const std::vector<SyntheticDesign>& designs, Gateway& gateway, Inpainter& inpainter,
                      std::uint64_t seed);

/// Writes `manifest.jsonl` and PNGs under `images/`. Returns the manifest path.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

/// Per-kind sample counts of a manifest file, plus "total".
std::map<std::string, std::int64_t> count_manifest(const std::filesystem::path& manifest);

/// Checks per-kind counts against N designs; returns violations.
std::vector<Violation> check_manifest_counts(const std::map<std::string, std::int64_t>& counts, std::int64_t designs);

}  // namespace layerkit
