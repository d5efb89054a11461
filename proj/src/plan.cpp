#include "layerkit/plan.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <json.hpp>

#include "layerkit/bundle.hpp"
#include "layerkit/prompt_assets.hpp"

namespace layerkit {

using nlohmann::json;

std::string_view to_string(ElementKind k) noexcept {
  switch (k) {
    case ElementKind::background: return "background";
    case ElementKind::object: return "object";
    case ElementKind::text: return "text";
  }
  return "background";
}

std::size_t DesignPlan::count(ElementKind kind) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(elements.begin(), elements.end(), [kind](const PlanElement& e) { return e.kind == kind; }));
}

std::vector<Violation> check_plan(const DesignPlan& plan) {
  std::vector<Violation> out;
  if (plan.elements.empty()) {
    out.push_back({"plan.empty", "plan has no elements"});
    return out;
  }
  if (plan.elements.front().kind != ElementKind::background) {
    out.push_back({"plan.background_first", "background must be first"});
  }
  if (plan.count(ElementKind::background) != 1) {
    out.push_back({"plan.background_count", "exactly one background element is required"});
  }
  bool seen_text = false;
  for (std::size_t i = 0; i < plan.elements.size(); ++i) {
    const auto& e = plan.elements[i];
    const std::string at = "element " + std::to_string(i);
    if (!e.box.valid_within(kPlanSpace, kPlanSpace)) {
      out.push_back({"plan.box_range", at + ": box " + e.box.to_string() + " must satisfy 0 <= x1 < x2 <= 336"});
    }
    if (e.kind == ElementKind::object && seen_text) {
      out.push_back({"plan.text_before_object", at + ": objects must precede all texts"});
    }
    if (e.kind != ElementKind::text) continue;
    seen_text = true;
    if (std::all_of(e.content.begin(), e.content.end(), [](unsigned char c) { return std::isspace(c); })) {
      out.push_back({"plan.empty_content", at + ": text content is empty"});
    }
    if (!e.color.valid()) out.push_back({"plan.color_range", at + ": color bins must lie in [0,25]"});
    if (e.font.empty()) out.push_back({"plan.font_missing", at + ": font is empty"});
    if (e.lines < 1) out.push_back({"plan.lines_range", at + ": lines must be >= 1"});
    if (e.angle < -180 || e.angle > 180) out.push_back({"plan.angle_range", at + ": angle outside [-180,180]"});
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// Rewrites Python-literal quirks into JSON while leaving valid JSON untouched.
std::string normalize_literals(std::string_view in, bool& single_quotes, bool& tuples, bool& trailing_commas) {
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  const std::size_t n = in.size();
  while (i < n) {
    const char c = in[i];
    if (c == '"') {
      out += c;
      ++i;
      while (i < n && in[i] != '"') {
        if (in[i] == '\\' && i + 1 < n) out += in[i++];
        out += in[i++];
      }
      if (i < n) out += in[i++];
    } else if (c == '\'') {
      single_quotes = true;
      out += '"';
      ++i;
      while (i < n && in[i] != '\'') {
        if (in[i] == '\\' && i + 1 < n) {
          if (in[i + 1] == '\'') {
            out += '\'';
          } else {
            out += in[i];
            out += in[i + 1];
          }
          i += 2;
          continue;
        }
        if (in[i] == '"') {
          out += "\\\"";
        } else {
          out += in[i];
        }
        ++i;
      }
      out += '"';
      if (i < n) ++i;
    } else if (c == '(' || c == ')') {
      tuples = true;
      out += c == '(' ? '[' : ']';
      ++i;
    } else if (c == ',') {
      std::size_t j = i + 1;
      while (j < n && std::isspace(static_cast<unsigned char>(in[j]))) ++j;
      if (j < n && (in[j] == ']' || in[j] == '}' || in[j] == ')')) {
        trailing_commas = true;
      } else {
        out += c;
      }
      ++i;
    } else {
      out += c;
      ++i;
    }
  }
  return out;
}

const std::set<std::string>& text_keys() {
  static const std::set<std::string> keys{"content", "color", "font", "alignment", "lines", "angle"};
  return keys;
}

PlanElement element_from_json(const json& j, std::size_t index, std::vector<Violation>& violations) {
  PlanElement e;
  const std::string at = "element " + std::to_string(index);
  if (!j.is_object()) {
    violations.push_back({"plan.element_not_object", at + ": expected an object"});
    return e;
  }
  const std::string type = j.contains("type") && j["type"].is_string() ? j["type"].get<std::string>() : "";
  if (type == "background") {
    e.kind = ElementKind::background;
  } else if (type == "object") {
    e.kind = ElementKind::object;
  } else if (type == "text") {
    e.kind = ElementKind::text;
  } else {
    violations.push_back({"plan.unknown_type", at + ": unknown element type '" + type + "'"});
    return e;
  }
  try {
    e.box = box_from_json(j.at("box"));
  } catch (const std::exception&) {
    violations.push_back({"plan.bad_box", at + ": box must be 4 integers"});
  }
  for (const auto& [key, _] : j.items()) {
    if (key == "type" || key == "box") continue;
    if (!text_keys().count(key)) {
      violations.push_back({"plan.unknown_field", at + ": unknown field '" + key + "'"});
    } else if (e.kind != ElementKind::text) {
      violations.push_back({"plan.unexpected_field", at + ": field '" + key + "' is only valid on text elements"});
    }
  }
  if (e.kind != ElementKind::text) return e;
  for (const auto& key : text_keys()) {
    if (!j.contains(key)) violations.push_back({"plan.missing_field", at + ": text element lacks '" + key + "'"});
  }
  std::vector<Violation> local;
  const TextLayer t = text_from_json(j, local, at);
  for (auto& v : local) {
    // Missing keys are already reported once above.
    const std::string key = v.code.substr(v.code.find('.') + 1);
    if (key != "box" && j.contains(key)) violations.push_back({"plan.bad_" + key, v.message});
  }
  e.content = t.content;
  e.color = t.color;
  e.font = t.font;
  e.alignment = t.alignment;
  e.lines = t.line_count;
  e.angle = t.angle;
  return e;
}

json element_to_json(const PlanElement& e) {
  if (e.kind != ElementKind::text) return json{{"type", std::string(to_string(e.kind))}, {"box", box_to_json(e.box)}};
  return json{{"type", "text"},
              {"box", box_to_json(e.box)},
              {"content", e.content},
              {"color", json::array({e.color.r, e.color.g, e.color.b, e.color.a})},
              {"font", e.font},
              {"alignment", std::string(to_string(e.alignment))},
              {"lines", e.lines},
              {"angle", e.angle}};
}

}  // namespace

ParsedPlan parse_plan(std::string_view raw) {
  ParsedPlan result;
  std::string_view text = trim(raw);
  std::string working;

  if (const auto open = text.find("```"); open != std::string_view::npos) {
    const auto line_end = text.find('\n', open);
    const auto body_start = line_end == std::string_view::npos ? open + 3 : line_end + 1;
    const auto close = text.find("```", body_start);
    text = trim(text.substr(body_start, close == std::string_view::npos ? std::string_view::npos : close - body_start));
    result.repairs.push_back("strip_code_fence");
  }
  if (!text.empty() && (text.front() != '[' || text.back() != ']')) {
    const auto first = text.find('[');
    const auto last = text.rfind(']');
    if (first != std::string_view::npos && last != std::string_view::npos && last > first) {
      text = text.substr(first, last - first + 1);
      result.repairs.push_back("extract_array");
    }
  }
  bool single_quotes = false, tuples = false, trailing = false;
  working = normalize_literals(text, single_quotes, tuples, trailing);
  if (single_quotes) result.repairs.push_back("single_quotes");
  if (tuples) result.repairs.push_back("tuple_to_array");
  if (trailing) result.repairs.push_back("trailing_comma");

  json doc;
  try {
    doc = json::parse(working);
  } catch (const json::parse_error& e) {
    throw PlanParseError("plan.syntax", std::string("plan text is not parseable: ") + e.what(), std::string(raw));
  }
  std::vector<Violation> violations;
  if (!doc.is_array()) {
    violations.push_back({"plan.not_array", "plan must be an array of element objects"});
  } else {
    for (std::size_t i = 0; i < doc.size(); ++i) result.plan.elements.push_back(element_from_json(doc[i], i, violations));
  }
  if (violations.empty()) violations = check_plan(result.plan);
  if (!violations.empty()) {
    std::string msg;
    for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v.message;
    throw PlanParseError("plan.invalid", msg, std::string(raw), std::move(violations));
  }
  return result;
}

std::string serialize_plan(const DesignPlan& plan) {
  std::string out = "[";
  for (std::size_t i = 0; i < plan.elements.size(); ++i) {
    if (i) out += ",\n";
    out += element_to_json(plan.elements[i]).dump(-1, ' ', false, json::error_handler_t::replace);
  }
  out += "]";
  return out;
}

int estimate_tokens(std::string_view text) noexcept { return static_cast<int>((text.size() + 3) / 4); }

SerializedPlan serialize_plan_checked(const DesignPlan& plan) {
  SerializedPlan out;
  out.text = serialize_plan(plan);
  out.token_estimate = estimate_tokens(out.text);
  out.over_budget = out.token_estimate > kMaxPlanTokens;
  return out;
}

std::string_view to_string(PromptVariant v) noexcept {
  switch (v) {
    case PromptVariant::genai: return "genai";
    case PromptVariant::original: return "original";
    case PromptVariant::background: return "background";
  }
  return "genai";
}

std::optional<PromptVariant> parse_prompt_variant(std::string_view s) noexcept {
  if (s == "genai") return PromptVariant::genai;
  if (s == "original") return PromptVariant::original;
  if (s == "background") return PromptVariant::background;
  return std::nullopt;
}

std::string python_repr(std::string_view s) {
  const bool has_single = s.find('\'') != std::string_view::npos;
  const bool has_double = s.find('"') != std::string_view::npos;
  const char quote = has_single && !has_double ? '"' : '\'';
  std::string out(1, quote);
  for (char c : s) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c == quote) {
      out += '\\';
      out += c;
    } else if (c == '\n') {
      out += "\\n";
    } else if (c == '\t') {
      out += "\\t";
    } else {
      out += c;
    }
  }
  out += quote;
  return out;
}

namespace {
std::string tuple(const BoundingBox& b) {
  return "(" + std::to_string(b.x1) + ", " + std::to_string(b.y1) + ", " + std::to_string(b.x2) + ", " +
         std::to_string(b.y2) + ")";
}

std::string substitute(std::string_view tmpl, std::string_view key, std::string_view value) {
  std::string out(tmpl);
  const auto pos = out.find(key);
  if (pos != std::string::npos) out.replace(pos, key.size(), value);
  return out;
}
}  // namespace

std::string format_ocr_boxes(const OcrResult& ocr) {
  std::string out = "[";
  for (std::size_t i = 0; i < ocr.items.size(); ++i) {
    if (i) out += ", ";
    out += "[" + tuple(ocr.items[i].box) + "]";
  }
  return out + "]";
}

std::string format_ocr_with_text(const OcrResult& ocr) {
  std::string out = "[";
  for (std::size_t i = 0; i < ocr.items.size(); ++i) {
    if (i) out += ", ";
    out += "[" + python_repr(ocr.items[i].text.value_or("")) + ", " + tuple(ocr.items[i].box) + "]";
  }
  return out + "]";
}

Stage2Prompt build_stage2_prompt(PromptVariant variant, const std::optional<std::string>& description,
                                 const std::optional<OcrResult>& ocr) {
  Stage2Prompt out;
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw Error("prompt.missing_component", what);
  };
  switch (variant) {
    case PromptVariant::genai:
      need(description.has_value() && !description->empty(), "genai prompt requires a description");
      need(ocr.has_value(), "genai prompt requires OCR boxes");
      out.text = substitute(substitute(assets::stage2_genai, "{description}", *description), "{ocr}",
                            format_ocr_boxes(*ocr));
      out.empty_ocr = ocr->items.empty();
      break;
    case PromptVariant::original:
      need(ocr.has_value(), "original prompt requires OCR text and boxes");
      for (const auto& item : ocr->items) need(item.text.has_value(), "original prompt requires OCR text for every box");
      out.text = substitute(assets::stage2_original, "{ocr}", format_ocr_with_text(*ocr));
      out.empty_ocr = ocr->items.empty();
      break;
    case PromptVariant::background:
      need(description.has_value() && !description->empty(), "background prompt requires a description");
      if (ocr.has_value()) throw Error("prompt.unexpected_component", "background prompt takes no OCR string");
      out.text = substitute(assets::stage2_background, "{description}", *description);
      break;
  }
  return out;
}

TextLayer text_layer_from_plan(const PlanElement& e, Canvas square) {
  TextLayer t;
  t.box = box_plan_to_canvas(e.box, square);
  t.content = e.content;
  t.color = e.color;
  t.font = e.font;
  t.alignment = e.alignment;
  t.line_count = e.lines;
  t.angle = e.angle;
  return t;
}

DesignPlan plan_from_design(const LayeredDesign& design) {
  const int side = std::max(design.canvas.width, design.canvas.height);
  const Canvas square{side, side};
  const int ox = (side - design.canvas.width) / 2, oy = (side - design.canvas.height) / 2;
  auto to_plan = [&](const BoundingBox& b) { return box_canvas_to_plan(b.translated(ox, oy), square); };

  DesignPlan plan;
  PlanElement bg;
  bg.kind = ElementKind::background;
  bg.box = to_plan({0, 0, design.canvas.width, design.canvas.height});
  plan.elements.push_back(bg);
  for (const auto& o : design.objects) {
    PlanElement e;
    e.kind = ElementKind::object;
    e.box = to_plan(o.box);
    plan.elements.push_back(e);
  }
  for (const auto& t : design.texts) {
    PlanElement e;
    e.kind = ElementKind::text;
    e.box = to_plan(t.box);
    e.content = t.content;
    e.color = t.color;
    e.font = t.font;
    e.alignment = t.alignment;
    e.lines = t.line_count;
    e.angle = t.angle;
    plan.elements.push_back(e);
  }
  return plan;
}

}  // namespace layerkit
