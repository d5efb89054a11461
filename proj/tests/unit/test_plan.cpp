#include <gtest/gtest.h>

#include <algorithm>

#include "layerkit/plan.hpp"

using namespace layerkit;

namespace {

DesignPlan sample_plan() {
  DesignPlan p;
  p.elements.push_back({});
  PlanElement o;
  o.kind = ElementKind::object;
  o.box = {30, 40, 120, 160};
  p.elements.push_back(o);
  PlanElement t;
  t.kind = ElementKind::text;
  t.box = {22, 64, 228, 132};
  t.content = "SUMMER SALE";
  t.color = {25, 0, 5, 25};
  t.font = "mono-bold";
  t.alignment = Alignment::left;
  t.lines = 2;
  t.angle = 0;
  p.elements.push_back(t);
  return p;
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

std::string parse_error_code(const std::string& text) {
  try {
    parse_plan(text);
  } catch (const PlanParseError& e) {
    return e.code();
  }
  return "";
}

}  // namespace

TEST(SerializePlan, CanonicalText) {
  const std::string expected =
      "[{\"box\":[0,0,336,336],\"type\":\"background\"},\n"
      "{\"box\":[30,40,120,160],\"type\":\"object\"},\n"
      "{\"alignment\":\"left\",\"angle\":0,\"box\":[22,64,228,132],\"color\":[25,0,5,25],\"content\":\"SUMMER SALE\","
      "\"font\":\"mono-bold\",\"lines\":2,\"type\":\"text\"}]";
  EXPECT_EQ(serialize_plan(sample_plan()), expected);
}

TEST(ParsePlan, RoundTripWithoutRepairs) {
  const ParsedPlan p = parse_plan(serialize_plan(sample_plan()));
  EXPECT_EQ(p.plan, sample_plan());
  EXPECT_TRUE(p.repairs.empty());
}

TEST(ParsePlan, RepairsFenceQuotesTuplesAndCommas) {
  const std::string text =
      "Sure! Here it is:\n```json\n[{'type': 'background', 'box': (0, 0, 336, 336)},\n"
      " {'type': 'object', 'box': (30, 40, 120, 160),},\n"
      " {'type': 'text', 'box': (22, 64, 228, 132), 'content': 'SUMMER SALE', 'color': (25, 0, 5, 25),"
      " 'font': 'mono-bold', 'alignment': 'left', 'lines': 2, 'angle': 0},\n]\n```";
  const ParsedPlan p = parse_plan(text);
  EXPECT_EQ(p.plan, sample_plan());
  EXPECT_EQ(p.repairs, (std::vector<std::string>{"strip_code_fence", "single_quotes", "tuple_to_array", "trailing_comma"}));
}

TEST(ParsePlan, ExtractsArrayFromProse) {
  const ParsedPlan p = parse_plan("The plan is " + serialize_plan(sample_plan()) + " as requested.");
  EXPECT_EQ(p.plan, sample_plan());
  EXPECT_EQ(p.repairs, (std::vector<std::string>{"extract_array"}));
}

TEST(ParsePlan, SingleQuotedContentWithApostrophe) {
  const ParsedPlan p = parse_plan(
      "[{'type': 'background', 'box': [0, 0, 336, 336]}, {'type': 'text', 'box': [1, 2, 3, 4], 'content': 'it\\'s \"on\"',"
      " 'color': [0, 0, 0, 25], 'font': 'f', 'alignment': 'center', 'lines': 1, 'angle': 0}]");
  EXPECT_EQ(p.plan.elements[1].content, "it's \"on\"");
}

TEST(ParsePlan, ErrorCodes) {
  EXPECT_EQ(parse_error_code("not a plan at all"), "plan.syntax");
  EXPECT_EQ(parse_error_code("{\"type\": \"background\"}"), "plan.invalid");
  EXPECT_EQ(parse_error_code("[{\"type\":\"object\",\"box\":[0,0,10,10]}]"), "plan.invalid");
  try {
    parse_plan("[{\"type\":\"background\",\"box\":[0,0,336,336]},{\"type\":\"shape\",\"box\":[0,0,1,1]}]");
    FAIL();
  } catch (const PlanParseError& e) {
    EXPECT_TRUE(has_code(e.violations(), "plan.unknown_type"));
    EXPECT_FALSE(e.raw_text().empty());
  }
  try {
    parse_plan("[{\"type\":\"background\",\"box\":[0,0,336,400]},{\"type\":\"object\",\"box\":[9,0,5,1]}]");
    FAIL();
  } catch (const PlanParseError& e) {
    EXPECT_EQ(e.violations().size(), 2u);
    EXPECT_TRUE(has_code(e.violations(), "plan.box_range"));
  }
}

TEST(ParsePlan, TextFieldsOnlyOnText) {
  try {
    parse_plan("[{\"type\":\"background\",\"box\":[0,0,336,336],\"font\":\"x\"}]");
    FAIL();
  } catch (const PlanParseError& e) {
    EXPECT_TRUE(has_code(e.violations(), "plan.unexpected_field"));
  }
}

TEST(CheckPlan, Ordering) {
  DesignPlan p = sample_plan();
  std::swap(p.elements[1], p.elements[2]);
  EXPECT_TRUE(has_code(check_plan(p), "plan.text_before_object"));
  p = sample_plan();
  p.elements.push_back({});
  EXPECT_TRUE(has_code(check_plan(p), "plan.background_count"));
  EXPECT_TRUE(has_code(check_plan(DesignPlan{}), "plan.empty"));
  p = sample_plan();
  p.elements[2].angle = 181;
  p.elements[2].lines = 0;
  EXPECT_TRUE(has_code(check_plan(p), "plan.angle_range"));
  EXPECT_TRUE(has_code(check_plan(p), "plan.lines_range"));
}

TEST(Tokens, Estimate) {
  EXPECT_EQ(estimate_tokens(""), 0);
  EXPECT_EQ(estimate_tokens("abcd"), 1);
  EXPECT_EQ(estimate_tokens("abcde"), 2);
  const auto s = serialize_plan_checked(sample_plan());
  EXPECT_EQ(s.token_estimate, estimate_tokens(s.text));
  EXPECT_FALSE(s.over_budget);
}

TEST(PythonRepr, QuoteSelection) {
  EXPECT_EQ(python_repr("SALE"), "'SALE'");
  EXPECT_EQ(python_repr("it's"), "\"it's\"");
  EXPECT_EQ(python_repr("say \"hi\""), "'say \"hi\"'");
  EXPECT_EQ(python_repr("both ' and \""), "'both \\' and \"'");
  EXPECT_EQ(python_repr("a\\b"), "'a\\\\b'");
}

TEST(OcrFormat, BoxesAndText) {
  OcrResult ocr;
  ocr.items.push_back({"SALE", {22, 64, 228, 132}});
  ocr.items.push_back({"50% off", {10, 200, 90, 220}});
  EXPECT_EQ(format_ocr_boxes(ocr), "[[(22, 64, 228, 132)], [(10, 200, 90, 220)]]");
  EXPECT_EQ(format_ocr_with_text(ocr), "[['SALE', (22, 64, 228, 132)], ['50% off', (10, 200, 90, 220)]]");
  EXPECT_EQ(format_ocr_boxes(OcrResult{}), "[]");
}

TEST(Stage2Prompt, GenaiEndsWithOcrBoxes) {
  OcrResult ocr;
  ocr.items.push_back({std::nullopt, {22, 64, 228, 132}});
  const auto p = build_stage2_prompt(PromptVariant::genai, std::string("A summer poster."), ocr);
  const std::string tail = "Support OCR results are: [[(22, 64, 228, 132)]].";
  ASSERT_GE(p.text.size(), tail.size());
  EXPECT_EQ(p.text.substr(p.text.size() - tail.size()), tail);
  EXPECT_NE(p.text.find("The caption of the image is A summer poster."), std::string::npos);
  EXPECT_FALSE(p.empty_ocr);
}

TEST(Stage2Prompt, OriginalCarriesText) {
  OcrResult ocr;
  ocr.items.push_back({"SALE", {1, 2, 3, 4}});
  const auto p = build_stage2_prompt(PromptVariant::original, std::nullopt, ocr);
  EXPECT_NE(p.text.find("[['SALE', (1, 2, 3, 4)]]"), std::string::npos);
}

TEST(Stage2Prompt, BackgroundHasNoOcr) {
  const auto p = build_stage2_prompt(PromptVariant::background, std::string("Bakery."), std::nullopt);
  EXPECT_EQ(p.text.find("OCR"), std::string::npos);
  EXPECT_NE(p.text.find("Bakery."), std::string::npos);
}

TEST(Stage2Prompt, EmptyOcrFlagged) {
  EXPECT_TRUE(build_stage2_prompt(PromptVariant::genai, std::string("x"), OcrResult{}).empty_ocr);
}

TEST(PlanFromDesign, SquareCanvas) {
  LayeredDesign d;
  d.canvas = {512, 512};
  d.background = RasterImage(d.canvas, {0, 0, 0, 255});
  TextLayer t{{32, 64, 256, 512}, "HI", {1, 2, 3, 25}, "mono-wide", Alignment::right, 1, 90};
  d.texts.push_back(t);
  const DesignPlan p = plan_from_design(d);
  ASSERT_EQ(p.elements.size(), 2u);
  EXPECT_EQ(p.elements[0].box, (BoundingBox{0, 0, 336, 336}));
  EXPECT_EQ(p.elements[1].box, (BoundingBox{21, 42, 168, 336}));
  EXPECT_EQ(p.elements[1].angle, 90);
  EXPECT_EQ(text_layer_from_plan(p.elements[1], d.canvas), t);
}

TEST(PlanFromDesign, WideCanvasUsesPaddedSquare) {
  LayeredDesign d;
  d.canvas = {512, 256};
  d.background = RasterImage(d.canvas, {0, 0, 0, 255});
  const DesignPlan p = plan_from_design(d);
  // Content band rows 128..384 of the 512 square -> 84..252 in plan space.
  EXPECT_EQ(p.elements[0].box, (BoundingBox{0, 84, 336, 252}));
}
