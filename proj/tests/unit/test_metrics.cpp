#include <gtest/gtest.h>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/metrics.hpp"
#include "support.hpp"

using namespace layerkit;

TEST(EditDistance, ClassicPairs) {
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(edit_distance("", "abc"), 3u);
  EXPECT_EQ(edit_distance("flaw", "lawn"), 2u);
  // Code points, not bytes: one substitution.
  EXPECT_EQ(edit_distance("café", "cafe"), 1u);
  EXPECT_EQ(edit_distance("日本", "日本語"), 1u);
}

TEST(NedSimilarity, FrozenValues) {
  EXPECT_DOUBLE_EQ(ned_similarity("kitten", "sitting"), 1.0 - 3.0 / 7.0);
  EXPECT_DOUBLE_EQ(ned_similarity("", ""), 1.0);
  EXPECT_DOUBLE_EQ(ned_similarity("abc", ""), 0.0);
  EXPECT_DOUBLE_EQ(ned_similarity("SALE", "SALE"), 1.0);
}

TEST(Iou, FrozenValues) {
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 2, 2}, {2, 0, 4, 2}), 0.0);
  EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {0, 0, 4, 2}), 0.5);
  const Mask a = Mask::from_box({4, 4}, {0, 0, 2, 2}), b = Mask::from_box({4, 4}, {1, 1, 3, 3});
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 1.0 / 7.0);
}

TEST(DetectionF1, HalfExample) {
  // One hit and one miss on each side: P = R = F1 = 0.5.
  const auto s = detection_f1({{0, 0, 10, 10}, {50, 50, 60, 60}}, {{0, 0, 10, 10}, {20, 20, 30, 30}});
  EXPECT_EQ(s.tp, 1);
  EXPECT_EQ(s.fp, 1);
  EXPECT_EQ(s.fn, 1);
  EXPECT_DOUBLE_EQ(s.precision, 0.5);
  EXPECT_DOUBLE_EQ(s.recall, 0.5);
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
}

TEST(DetectionF1, ThresholdIsInclusive) {
  EXPECT_EQ(detection_f1({{0, 0, 4, 2}}, {{0, 0, 4, 4}}).tp, 1);
  EXPECT_EQ(detection_f1({{0, 0, 4, 2}}, {{0, 0, 4, 4}}, 0.51).tp, 0);
}

TEST(DetectionF1, GreedyPrefersHigherIou) {
  // gt 0 overlaps pred 0 (IoU 1) and pred 1 (IoU 0.8); pred 1 must not steal it.
  const auto s = detection_f1({{0, 0, 10, 10}, {0, 0, 10, 8}}, {{0, 0, 10, 10}});
  ASSERT_EQ(s.matches.size(), 1u);
  EXPECT_EQ(s.matches[0], (std::pair<int, int>{0, 0}));
}

TEST(DetectionF1, EmptyCases) {
  EXPECT_DOUBLE_EQ(detection_f1({}, {}).f1, 1.0);
  EXPECT_DOUBLE_EQ(detection_f1({{0, 0, 1, 1}}, {}).f1, 0.0);
  EXPECT_DOUBLE_EQ(detection_f1({}, {{0, 0, 1, 1}}).recall, 0.0);
}

TEST(Psnr, FrozenValue) {
  // MSE 100: 10 log10(65025 / 100) = 28.1308.
  const RasterImage a({4, 4}, {100, 100, 100, 255}), b({4, 4}, {110, 90, 110, 255});
  EXPECT_NEAR(psnr(a, b), 28.1308, 1e-4);
  EXPECT_DOUBLE_EQ(psnr(a, a), kPsnrCap);
  EXPECT_THROW(psnr(a, RasterImage({2, 2})), Error);
}

TEST(LayerCountL1, FrozenValue) {
  EXPECT_DOUBLE_EQ(layer_count_l1({3, 4, 5}, {3, 5, 4}), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(layer_count_l1({}, {}), 0.0);
  try {
    layer_count_l1({1}, {1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "metrics.length_mismatch");
  }
}

namespace {

DesignPlan text_plan(std::vector<PlanElement> texts) {
  DesignPlan p;
  p.elements.push_back({});
  for (auto& t : texts) {
    t.kind = ElementKind::text;
    if (t.font.empty()) t.font = "mono-regular";
    p.elements.push_back(t);
  }
  return p;
}

PlanElement text(BoundingBox box, std::string content) {
  PlanElement e;
  e.box = box;
  e.content = std::move(content);
  return e;
}

}  // namespace

TEST(AttributeAccuracy, CountsOverMatchedPairs) {
  PlanElement g1 = text({0, 0, 100, 20}, "SUMMER"), g2 = text({0, 50, 100, 70}, "SALE");
  PlanElement p1 = g1, p2 = g2;
  p1.content = "SUMMFR";
  p2.color.r = 3;
  p2.font = "mono-bold";
  const auto a = attribute_accuracy(text_plan({p1, p2}), text_plan({g1, g2}));
  EXPECT_EQ(a.pairs, 2);
  EXPECT_DOUBLE_EQ(a.rate(a.color), 0.5);
  EXPECT_DOUBLE_EQ(a.rate(a.font), 0.5);
  EXPECT_DOUBLE_EQ(a.rate(a.alignment), 1.0);
  EXPECT_DOUBLE_EQ(a.mean_ned(), (1.0 - 1.0 / 6.0 + 1.0) / 2.0);
}

TEST(AttributeAccuracy, NoPairsScoresOne) {
  const auto a = attribute_accuracy(text_plan({}), text_plan({text({0, 0, 5, 5}, "X")}));
  EXPECT_EQ(a.pairs, 0);
  EXPECT_DOUBLE_EQ(a.rate(a.color), 1.0);
  EXPECT_DOUBLE_EQ(a.mean_ned(), 1.0);
}

TEST(EvaluateSample, LayerCountsAndPsnr) {
  const DesignPlan gt = text_plan({text({0, 0, 10, 10}, "A"), text({20, 20, 30, 30}, "B")});
  const DesignPlan pred = text_plan({text({0, 0, 10, 10}, "A")});
  const RasterImage bg({4, 4}, {9, 9, 9, 255});
  const SampleEval s = evaluate_sample("s", pred, gt, &bg, &bg);
  EXPECT_EQ(s.pred_texts, 1);
  EXPECT_EQ(s.gt_texts, 2);
  EXPECT_EQ(s.text.tp, 1);
  ASSERT_TRUE(s.background_psnr.has_value());
  EXPECT_DOUBLE_EQ(*s.background_psnr, kPsnrCap);
}

TEST(EvaluateDirs, PlanFilesPairByName) {
  test_support::ScratchDir pred("eval_pred"), gt("eval_gt");
  const DesignPlan a = text_plan({text({0, 0, 10, 10}, "A")});
  const DesignPlan b = text_plan({text({0, 0, 10, 10}, "B"), text({50, 50, 60, 60}, "C")});
  for (const auto& [dir, name, plan] : {std::tuple{&pred, "s1", a}, std::tuple{&gt, "s1", a}, std::tuple{&gt, "s2", b}}) {
    std::filesystem::create_directories(*dir / name);
    write_text_file(*dir / name / "plan.json", serialize_plan(plan));
  }
  const EvalReport r = evaluate_dirs(pred.path(), gt.path());
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_FALSE(r.samples[0].missing_prediction);
  EXPECT_TRUE(r.samples[1].missing_prediction);
  const auto summary = r.summary();
  // tp 1, fp 0, fn 2: P = 1, R = 1/3, F1 = 0.5.
  EXPECT_DOUBLE_EQ(summary.at("text_detection_f1"), 0.5);
  EXPECT_NE(r.to_csv().find("s2"), std::string::npos);
  EXPECT_TRUE(r.to_json().contains("summary"));
}
