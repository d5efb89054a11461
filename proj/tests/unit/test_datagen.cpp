#include <gtest/gtest.h>

#include <fstream>

#include "layerkit/datagen.hpp"
#include "layerkit/metrics.hpp"
#include "layerkit/mock_experts.hpp"
#include "support.hpp"

using namespace layerkit;

namespace {

int differing_pixels(const RasterImage& a, const RasterImage& b, const Mask& where) {
  int n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) n += where.test(x, y) && !(a.at(x, y) == b.at(x, y));
  }
  return n;
}

}  // namespace

TEST(SynthDesign, SameSeedSameDesign) {
  SyntheticDesignSpec spec;
  spec.seed = 77;
  const SyntheticDesign a = synth_design(spec), b = synth_design(spec);
  EXPECT_EQ(a.design, b.design);
  EXPECT_EQ(a.reference, b.reference);
  EXPECT_EQ(a.description, b.description);
  spec.seed = 78;
  EXPECT_NE(synth_design(spec).design, a.design);
}

TEST(SynthDesign, ValidAndPlanConsistent) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    SyntheticDesignSpec spec;
    spec.seed = seed;
    if (seed % 4 == 0) spec.canvas = {512, 384};
    const SyntheticDesign s = synth_design(spec);
    EXPECT_TRUE(check_design(s.design).empty()) << seed;
    EXPECT_TRUE(check_plan(s.plan).empty()) << seed;
    EXPECT_EQ(plan_from_design(s.design), s.plan) << seed;
    EXPECT_EQ(composite(s.design), s.reference) << seed;
  }
}

TEST(SynthDesign, CountsFollowDistribution) {
  // Weights give means 1.01 objects and 3.11 texts.
  constexpr int n = 600;
  double objects = 0, texts = 0;
  for (int seed = 0; seed < n; ++seed) {
    SyntheticDesignSpec spec;
    spec.seed = 5000 + seed;
    spec.canvas = {336, 336};
    const SyntheticDesign s = synth_design(spec);
    ASSERT_LE(s.design.objects.size(), 4u);
    ASSERT_GE(s.design.texts.size(), 1u);
    ASSERT_LE(s.design.texts.size(), 5u);
    objects += static_cast<double>(s.design.objects.size());
    texts += static_cast<double>(s.design.texts.size());
  }
  EXPECT_NEAR(objects / n, 1.01, 0.15);
  EXPECT_NEAR(texts / n, 3.11, 0.2);
}

TEST(SynthDesign, ExplicitCountsAndErrors) {
  SyntheticDesignSpec spec;
  spec.seed = 3;
  spec.object_count = 3;
  spec.text_count = 5;
  const SyntheticDesign s = synth_design(spec);
  EXPECT_EQ(s.design.objects.size(), 3u);
  EXPECT_EQ(s.design.texts.size(), 5u);

  spec.text_count = 0;
  try {
    synth_design(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "datagen.spec");
  }
  SyntheticDesignSpec small;
  small.canvas = {200, 200};
  try {
    synth_design(small);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "datagen.canvas");
  }
}

TEST(SynthDesign, NonsensicalGlyphsOnlyChangeTextPixels) {
  SyntheticDesignSpec spec;
  spec.seed = 19;
  const SyntheticDesign clean = synth_design(spec);
  spec.nonsensical_glyphs = true;
  const SyntheticDesign scrambled = synth_design(spec);
  EXPECT_EQ(clean.design, scrambled.design);
  EXPECT_NE(clean.reference, scrambled.reference);
  const Mask outside = text_mask(clean.design, 2).inverted();
  EXPECT_EQ(differing_pixels(clean.reference, scrambled.reference, outside), 0);
}

TEST(CorruptText, StrengthRange) {
  SyntheticDesignSpec spec;
  spec.seed = 2;
  const SyntheticDesign s = synth_design(spec);
  MockInpainter inpainter;
  std::mt19937_64 rng(1);
  EXPECT_THROW(corrupt_text(s.design, 0.49, inpainter, rng), Error);
  EXPECT_THROW(corrupt_text(s.design, 0.71, inpainter, rng), Error);
  EXPECT_NO_THROW(corrupt_text(s.design, kMinCorruptStrength, inpainter, rng));
  EXPECT_NO_THROW(corrupt_text(s.design, kMaxCorruptStrength, inpainter, rng));
}

TEST(CorruptText, TouchesOnlyTextRegions) {
  SyntheticDesignSpec spec;
  spec.seed = 9;
  const SyntheticDesign s = synth_design(spec);
  MockInpainter inpainter;
  std::mt19937_64 rng(4);
  const RasterImage out = corrupt_text(s.design, 0.6, inpainter, rng);
  const RasterImage ref = composite(s.design);
  const Mask inside = text_mask(s.design);
  EXPECT_EQ(differing_pixels(out, ref, inside.inverted()), 0);
  EXPECT_GT(differing_pixels(out, ref, inside), 0);
}

TEST(StripText, IsBackgroundPlusObjects) {
  SyntheticDesignSpec spec;
  spec.seed = 10;
  SyntheticDesign s = synth_design(spec);
  const RasterImage stripped = strip_text(s.design);
  s.design.texts.clear();
  EXPECT_EQ(stripped, composite(s.design));
}

TEST(Dataset, SampleArithmetic) {
  EXPECT_EQ(expected_sample_count(1), 4);
  EXPECT_EQ(expected_sample_count(39233), 156932);
}

TEST(Dataset, BuildWriteCount) {
  std::vector<SyntheticDesign> designs;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SyntheticDesignSpec spec;
    spec.seed = seed;
    designs.push_back(synth_design(spec));
  }
  auto gateway = make_mock_gateway(0);
  MockInpainter inpainter;
  const Dataset ds = build_dataset(designs, *gateway, inpainter, 0);
  ASSERT_EQ(ds.samples.size(), 12u);
  EXPECT_EQ(ds.samples[0].kind, SampleKind::original);
  EXPECT_EQ(ds.samples[1].kind, SampleKind::nonsensical);
  EXPECT_EQ(ds.samples[2].kind, SampleKind::background);
  EXPECT_EQ(ds.samples[3].kind, SampleKind::questionnaire);
  EXPECT_EQ(parse_plan(ds.samples[0].target).plan, designs[0].plan);
  EXPECT_EQ(ds.samples[0].target, ds.samples[1].target);
  EXPECT_EQ(ds.samples[3].target.size(), 1u);

  test_support::ScratchDir dir("datagen_write");
  const auto manifest = write_dataset(ds, dir.path());
  const auto counts = count_manifest(manifest);
  EXPECT_EQ(counts.at("total"), 12);
  EXPECT_EQ(counts.at("questionnaire"), 3);
  EXPECT_TRUE(check_manifest_counts(counts, 3).empty());
  const auto v = check_manifest_counts(counts, 4);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].code, "datagen.count");
}

TEST(Dataset, BuildIsDeterministic) {
  SyntheticDesignSpec spec;
  spec.seed = 42;
  const std::vector<SyntheticDesign> designs{synth_design(spec)};
  MockInpainter inpainter;
  const Dataset a = build_dataset(designs, *make_mock_gateway(1), inpainter, 1);
  const Dataset b = build_dataset(designs, *make_mock_gateway(1), inpainter, 1);
  ASSERT_EQ(a.samples.size(), b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    EXPECT_EQ(a.samples[i].reference, b.samples[i].reference);
    EXPECT_EQ(a.samples[i].prompt, b.samples[i].prompt);
    EXPECT_EQ(a.samples[i].target, b.samples[i].target);
  }
}

TEST(Dataset, ManifestErrors) {
  test_support::ScratchDir dir("datagen_bad");
  std::ofstream(dir / "manifest.jsonl") << "{\"kind\":\"original\"}\nnot json\n";
  try {
    count_manifest(dir / "manifest.jsonl");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "datagen.manifest");
  }
  EXPECT_THROW(count_manifest(dir / "absent.jsonl"), Error);
}
