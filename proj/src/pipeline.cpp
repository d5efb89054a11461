#include "layerkit/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/prompt_assets.hpp"

namespace layerkit {

using nlohmann::json;

std::string_view to_string(PipelineMode m) noexcept {
  switch (m) {
    case PipelineMode::from_intention: return "from_intention";
    case PipelineMode::from_sketch: return "from_sketch";
    case PipelineMode::from_reference: return "from_reference";
    case PipelineMode::add_text_to_background: return "add_text_to_background";
    case PipelineMode::derender: return "derender";
  }
  return "from_intention";
}

std::optional<PipelineMode> parse_pipeline_mode(std::string_view s) noexcept {
  for (PipelineMode m : {PipelineMode::from_intention, PipelineMode::from_sketch, PipelineMode::from_reference,
                         PipelineMode::add_text_to_background, PipelineMode::derender}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

namespace {

bool blank(const std::optional<std::string>& s) {
  return !s || std::all_of(s->begin(), s->end(), [](unsigned char c) { return std::isspace(c); });
}

std::string substitute_all(std::string_view tmpl, std::string_view key, std::string_view value) {
  std::string out(tmpl);
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size())) {
    out.replace(pos, key.size(), value);
  }
  return out;
}

std::string strip_fences(std::string s) {
  auto trim = [](std::string& t) {
    const auto a = t.find_first_not_of(" \t\r\n");
    const auto b = t.find_last_not_of(" \t\r\n");
    t = a == std::string::npos ? std::string{} : t.substr(a, b - a + 1);
  };
  trim(s);
  if (s.rfind("```", 0) == 0) {
    const auto nl = s.find('\n');
    s = nl == std::string::npos ? s.substr(3) : s.substr(nl + 1);
    if (const auto end = s.rfind("```"); end != std::string::npos) s.resize(end);
    trim(s);
  }
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

Mask dilated_box_mask(Canvas canvas, const BoundingBox& box) {
  return Mask::from_box(canvas, box.expanded(kMaskDilation).intersect({0, 0, canvas.width, canvas.height}));
}

}  // namespace

std::vector<Violation> check_request(const PipelineRequest& r) {
  std::vector<Violation> v;
  auto need = [&](bool ok, const char* what) {
    if (!ok) v.push_back({"pipeline.mode_inputs", std::string(to_string(r.mode)) + " requires " + what});
  };
  auto forbid = [&](bool present, const char* what) {
    if (present) v.push_back({"pipeline.mode_inputs", std::string(to_string(r.mode)) + " does not take " + what});
  };
  switch (r.mode) {
    case PipelineMode::from_intention:
      need(!blank(r.intention), "an intention");
      forbid(r.sketch.has_value(), "a sketch");
      forbid(r.reference.has_value(), "a reference");
      break;
    case PipelineMode::from_sketch:
      need(r.sketch.has_value(), "a sketch");
      forbid(r.reference.has_value(), "a reference");
      break;
    case PipelineMode::from_reference:
    case PipelineMode::derender:
      need(r.reference.has_value(), "a reference image");
      forbid(r.sketch.has_value(), "a sketch");
      break;
    case PipelineMode::add_text_to_background:
      need(r.reference.has_value(), "a background image");
      need(!blank(r.description) || !blank(r.intention), "a description");
      forbid(r.sketch.has_value(), "a sketch");
      break;
  }
  if (r.canvas.width <= 0 || r.canvas.height <= 0) v.push_back({"pipeline.canvas", "canvas must be positive"});
  return v;
}

std::string expand_intention(const std::string& intention, Gateway& gateway) {
  if (blank(intention)) throw Error("pipeline.precondition", "intention must not be empty");
  const std::string prompt = substitute_all(assets::stage1_expand_intention, "{intention}", intention);
  // The expansion prompt is text-only; a blank canvas stands in for the image slot.
  const RasterImage blank_image({kVlmImageSide, kVlmImageSide}, {255, 255, 255, 255});
  return strip_fences(gateway.vlm_complete(blank_image, prompt));
}

std::string describe_sketch(const std::optional<RasterImage>& sketch, const std::string& intention, Gateway& gateway) {
  if (!sketch || sketch->empty()) throw Error("pipeline.precondition", "sketch image is missing");
  const std::string prompt = substitute_all(assets::stage1_describe_sketch, "{intention}", intention);
  return strip_fences(gateway.vlm_complete(*sketch, prompt));
}

RasterImage create_reference(const std::string& prompt, Gateway& gateway, Canvas canvas) {
  if (canvas.width <= 0 || canvas.height <= 0) throw Error("pipeline.canvas", "canvas must be positive");
  const int longer = std::max(canvas.width, canvas.height);
  const Canvas gen{static_cast<int>(round_half_up_div(std::int64_t{canvas.width} * kT2iCanvas.width, longer)),
                   static_cast<int>(round_half_up_div(std::int64_t{canvas.height} * kT2iCanvas.height, longer))};
  const RasterImage image = gateway.text_to_image(prompt, gen);
  return resize_area(image, canvas);
}

PlanOutcome plan_design(const RasterImage& reference, const std::optional<std::string>& description, Gateway& gateway,
                        PromptVariant variant) {
  if (reference.empty()) throw Error("pipeline.precondition", "reference image is empty");
  PlanOutcome out;
  RasterImage square = reference;
  if (!reference.canvas().is_square()) {
    auto [padded, rec] = pad_to_square(reference);
    square = std::move(padded);
    out.pad = rec;
  }
  if (variant != PromptVariant::background) out.ocr = gateway.ocr(square);
  const Stage2Prompt prompt = build_stage2_prompt(variant, description, out.ocr);
  out.prompt = prompt.text;
  out.raw_text = gateway.vlm_complete(square, prompt.text, kMaxPlanTokens);
  ParsedPlan parsed = parse_plan(out.raw_text);
  out.plan = std::move(parsed.plan);
  out.repairs = std::move(parsed.repairs);
  return out;
}

LayeredDesign extract_layers(const RasterImage& reference, const DesignPlan& plan, Gateway& gateway, Selector& selector,
                             PipelineTrace* trace) {
  if (!reference.canvas().is_square()) throw Error("pipeline.precondition", "extract_layers needs a square reference");
  if (auto v = check_plan(plan); !v.empty()) throw ValidationError(std::move(v));
  const Canvas canvas = reference.canvas();

  LayeredDesign design;
  design.canvas = canvas;
  RasterImage current = reference;
  for (auto& p : current.pixels()) p.a = 255;
  int step = 0;

  auto remove_step = [&](const Mask& mask, const char* label, int plan_index) {
    const RemovalBatch batch = gateway.remove(current, mask, kDefaultRemovalCandidates);
    const Selection sel = selector.choose(current, mask, batch, step);
    if (sel.index < 0 || sel.index >= static_cast<int>(batch.candidates.size())) {
      throw Error("pipeline.selection", "selector chose a candidate outside the batch");
    }
    if (trace) trace->removals.push_back({label, plan_index, current, mask, batch.candidates, sel});
    current = batch.candidates[sel.index];
    ++step;
  };

  Mask text_union(canvas);
  for (const auto& e : plan.elements) {
    if (e.kind == ElementKind::text) {
      text_union = text_union.united(dilated_box_mask(canvas, box_plan_to_canvas(e.box, canvas)));
    }
  }
  if (text_union.any()) remove_step(text_union, "text", -1);

  std::vector<int> object_indices;
  for (int i = 0; i < static_cast<int>(plan.elements.size()); ++i) {
    if (plan.elements[i].kind == ElementKind::object) object_indices.push_back(i);
  }
  std::vector<ObjectLayer> objects(object_indices.size());
  for (int k = static_cast<int>(object_indices.size()) - 1; k >= 0; --k) {
    const BoundingBox box = box_plan_to_canvas(plan.elements[object_indices[k]].box, canvas);
    ObjectLayer& o = objects[k];
    o.box = box;
    o.mask = gateway.segment(current, box);
    o.image = cutout(current, o.mask);
    if (!o.mask.any()) {
      if (trace) trace->notes.push_back("object " + std::to_string(object_indices[k]) + ": empty mask, removal skipped");
      continue;
    }
    remove_step(o.mask.dilated(kMaskDilation), "object", object_indices[k]);
  }
  design.objects = std::move(objects);
  design.background = std::move(current);
  for (const auto& e : plan.elements) {
    if (e.kind == ElementKind::text) design.texts.push_back(text_layer_from_plan(e, canvas));
  }
  validate_design(design);
  return design;
}

namespace {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace

PipelineResult run(const PipelineRequest& request, Gateway& gateway, Selector* selector) {
  if (auto v = check_request(request); !v.empty()) throw ValidationError(std::move(v));
  QuestionnaireSelector default_selector(gateway);
  Selector& chosen = selector ? *selector : default_selector;

  PipelineResult result;
  PipelineTrace& trace = result.trace;
  trace.mode = std::string(to_string(request.mode));
  trace.seed = request.seed;
  gateway.drain_warnings();

  auto stage = [&](const std::string& name, auto&& fn) {
    Stopwatch sw;
    trace.stages.push_back(name);
    fn();
    trace.timings_ms.emplace_back(name, sw.ms());
  };

  try {
    std::optional<std::string> description = request.description;
    if (blank(description) && !blank(request.intention)) description = request.intention;
    RasterImage reference;

    switch (request.mode) {
      case PipelineMode::from_intention:
        stage("expand_intention", [&] {
          trace.expanded_prompt = expand_intention(*request.intention, gateway);
          description = trace.expanded_prompt;
        });
        stage("create_reference", [&] { reference = create_reference(*trace.expanded_prompt, gateway, request.canvas); });
        break;
      case PipelineMode::from_sketch:
        stage("describe_sketch", [&] {
          trace.expanded_prompt =
              describe_sketch(request.sketch, request.intention.value_or(kDefaultDescription), gateway);
          description = trace.expanded_prompt;
        });
        stage("create_reference", [&] { reference = create_reference(*trace.expanded_prompt, gateway, request.canvas); });
        break;
      default:
        reference = *request.reference;
        break;
    }
    if (blank(description)) description = std::string(kDefaultDescription);
    trace.reference = reference;

    const auto [square, pad] = pad_to_square(reference);
    if (!pad.is_identity()) trace.pad = pad;

    const PromptVariant variant = request.mode == PipelineMode::derender ? PromptVariant::original
                                  : request.mode == PipelineMode::add_text_to_background ? PromptVariant::background
                                                                                          : PromptVariant::genai;
    stage("plan_design", [&] {
      PlanOutcome outcome;
      try {
        outcome = plan_design(square, description, gateway, variant);
      } catch (const PlanParseError& e) {
        trace.raw_plan = e.raw_text();
        throw;
      }
      trace.ocr = outcome.ocr;
      trace.plan_prompt = outcome.prompt;
      trace.raw_plan = outcome.raw_text;
      trace.repairs = outcome.repairs;
      result.plan = std::move(outcome.plan);
    });

    LayeredDesign square_design;
    if (request.mode == PipelineMode::add_text_to_background) {
      stage("render_text", [&] {
        square_design.canvas = square.canvas();
        square_design.background = square;
        for (const auto& e : result.plan.elements) {
          if (e.kind == ElementKind::text) square_design.texts.push_back(text_layer_from_plan(e, square.canvas()));
        }
        const auto n_obj = result.plan.count(ElementKind::object);
        if (n_obj) trace.notes.push_back(std::to_string(n_obj) + " planned objects ignored when adding text");
      });
    } else {
      stage("extract_layers", [&] { square_design = extract_layers(square, result.plan, gateway, chosen, &trace); });
    }
    result.design = pad.is_identity() ? std::move(square_design) : crop_from_square(square_design, pad);
    if (request.mode == PipelineMode::add_text_to_background) result.design.background = reference;
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    for (auto& w : gateway.drain_warnings()) trace.warnings.push_back(std::move(w));
    throw PipelineError(e, std::move(trace));
  }
  for (auto& w : gateway.drain_warnings()) trace.warnings.push_back(std::move(w));
  return result;
}

json PipelineTrace::to_json(bool include_timings) const {
  json j;
  j["mode"] = mode;
  j["seed"] = seed;
  j["stages"] = stages;
  j["expanded_prompt"] = expanded_prompt ? json(*expanded_prompt) : json(nullptr);
  if (reference) j["reference"] = {{"width", reference->width()}, {"height", reference->height()}, {"fingerprint", fingerprint(*reference)}};
  if (pad) {
    j["pad"] = {{"original", {pad->original.width, pad->original.height}},
                {"side", pad->side},
                {"offset", {pad->offset_x, pad->offset_y}}};
  }
  if (ocr) {
    json items = json::array();
    for (const auto& it : ocr->items) {
      items.push_back({{"text", it.text ? json(*it.text) : json(nullptr)}, {"box", box_to_json(it.box)}});
    }
    j["ocr"] = items;
  }
  j["plan_prompt"] = plan_prompt ? json(*plan_prompt) : json(nullptr);
  j["raw_plan"] = raw_plan ? json(*raw_plan) : json(nullptr);
  j["repairs"] = repairs;
  json steps = json::array();
  for (std::size_t k = 0; k < removals.size(); ++k) {
    const auto& s = removals[k];
    steps.push_back({{"step", k},
                     {"label", s.label},
                     {"plan_index", s.plan_index},
                     {"mask_area", s.mask.area()},
                     {"mask_bounds", box_to_json(s.mask.bounds())},
                     {"candidates", s.candidates.size()},
                     {"selected", s.selection.index},
                     {"reply", s.selection.reply},
                     {"fell_back", s.selection.fell_back}});
  }
  j["removals"] = steps;
  j["notes"] = notes;
  j["warnings"] = warnings;
  if (include_timings) {
    json t = json::object();
    for (const auto& [name, ms] : timings_ms) t[name] = ms;
    j["timings_ms"] = t;
  }
  return j;
}

void PipelineTrace::save(const std::filesystem::path& dir, bool with_timings) const {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "trace.json", to_json(false).dump(2) + "\n");
  if (with_timings) {
    json t = json::object();
    for (const auto& [name, ms] : timings_ms) t[name] = ms;
    write_text_file(dir / "timings.json", t.dump(2) + "\n");
  }
  if (reference) write_png(*reference, dir / "reference.png");
  for (std::size_t k = 0; k < removals.size(); ++k) {
    const auto& s = removals[k];
    char name[64];
    std::snprintf(name, sizeof name, "step_%02zu_mask.png", k);
    write_png(s.mask.to_image(), dir / name);
    if (s.candidates.size() == 4) {
      std::snprintf(name, sizeof name, "step_%02zu_grid.png", k);
      write_png(compose_grid(s.input, masked_view(s.input, s.mask), s.candidates).grid, dir / name);
    } else {
      for (std::size_t c = 0; c < s.candidates.size(); ++c) {
        std::snprintf(name, sizeof name, "step_%02zu_candidate_%zu.png", k, c);
        write_png(s.candidates[c], dir / name);
      }
    }
  }
}

}  // namespace layerkit
