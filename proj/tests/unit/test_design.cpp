#include <gtest/gtest.h>

#include <algorithm>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/design.hpp"
#include "layerkit/text_render.hpp"
#include "support.hpp"

using namespace layerkit;

namespace {

LayeredDesign sample_design() {
  LayeredDesign d;
  d.canvas = {64, 48};
  d.background = RasterImage(d.canvas, {200, 210, 220, 255});
  ObjectLayer o;
  o.box = {8, 8, 24, 20};
  o.mask = Mask::from_box(d.canvas, o.box);
  o.image = cutout(RasterImage(d.canvas, {10, 120, 30, 255}), o.mask);
  d.objects.push_back(o);
  TextLayer t;
  t.box = {30, 20, 62, 40};
  t.content = "HELLO";
  t.color = {0, 0, 0, 25};
  t.font = "mono-regular";
  d.texts.push_back(t);
  return d;
}

bool has_code(const std::vector<Violation>& v, const std::string& code) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.code == code; });
}

}  // namespace

TEST(BlendOver, HalfAlphaRedOverWhite) {
  RasterImage dst({1, 1}, {255, 255, 255, 255});
  RasterImage src({1, 1}, {255, 0, 0, 128});
  blend_over(dst, src);
  // (128*0 + 127*255) / 255 = 127.
  EXPECT_EQ(dst.at(0, 0), (Rgba{255, 127, 127, 255}));
}

TEST(BlendOver, TransparentAndOpaqueExtremes) {
  RasterImage dst({1, 1}, {1, 2, 3, 255});
  blend_over(dst, RasterImage({1, 1}, {9, 9, 9, 0}));
  EXPECT_EQ(dst.at(0, 0), (Rgba{1, 2, 3, 255}));
  blend_over(dst, RasterImage({1, 1}, {9, 8, 7, 255}));
  EXPECT_EQ(dst.at(0, 0), (Rgba{9, 8, 7, 255}));
}

TEST(PadToSquare, WideCanvasGetsGrayBands) {
  const RasterImage img({512, 256}, {0, 0, 0, 255});
  const auto [sq, rec] = pad_to_square(img);
  ASSERT_EQ(sq.canvas(), (Canvas{512, 512}));
  EXPECT_EQ(rec.offset_x, 0);
  EXPECT_EQ(rec.offset_y, 128);
  EXPECT_EQ(sq.at(0, 127), kPadGray);
  EXPECT_EQ(sq.at(0, 128), (Rgba{0, 0, 0, 255}));
  EXPECT_EQ(sq.at(511, 383), (Rgba{0, 0, 0, 255}));
  EXPECT_EQ(sq.at(511, 384), kPadGray);
  EXPECT_EQ(crop_from_square(sq, rec), img);
}

TEST(PadToSquare, SquareIsIdentity) {
  const RasterImage img = test_support::noise_image({20, 20}, 1);
  const auto [sq, rec] = pad_to_square(img);
  EXPECT_TRUE(rec.is_identity());
  EXPECT_EQ(sq, img);
}

TEST(PadToSquare, OddDifferenceRoundsOffsetDown) {
  const auto [sq, rec] = pad_to_square(RasterImage({10, 7}));
  EXPECT_EQ(sq.width(), 10);
  EXPECT_EQ(rec.offset_y, 1);
}

TEST(CropDesign, DropsLayersInPadding) {
  LayeredDesign d;
  d.canvas = {100, 100};
  d.background = RasterImage(d.canvas, kPadGray);
  TextLayer in{{10, 30, 50, 50}, "IN", {0, 0, 0, 25}, "mono-regular"};
  TextLayer out{{10, 2, 50, 20}, "OUT", {0, 0, 0, 25}, "mono-regular"};
  d.texts = {in, out};
  const PadRecord rec{{100, 50}, 100, 0, 25};
  const LayeredDesign c = crop_from_square(d, rec);
  EXPECT_EQ(c.canvas, (Canvas{100, 50}));
  ASSERT_EQ(c.texts.size(), 1u);
  EXPECT_EQ(c.texts[0].content, "IN");
  EXPECT_EQ(c.texts[0].box, (BoundingBox{10, 5, 50, 25}));
}

TEST(CheckDesign, ValidSampleHasNoViolations) { EXPECT_TRUE(check_design(sample_design()).empty()); }

TEST(CheckDesign, ItemizesEveryProblem) {
  LayeredDesign d = sample_design();
  d.background = RasterImage({10, 10});
  d.objects[0].mask.set(40, 40);
  d.texts[0].color.r = 26;
  d.texts[0].box = {30, 20, 90, 40};
  const auto v = check_design(d);
  EXPECT_TRUE(has_code(v, "design.background_size"));
  EXPECT_TRUE(has_code(v, "design.mask_outside_box"));
  EXPECT_TRUE(has_code(v, "text.color_range"));
  EXPECT_TRUE(has_code(v, "text.bad_box"));
  EXPECT_THROW(validate_design(d), ValidationError);
}

TEST(CheckDesign, MaskMayExtendByDilationMargin) {
  LayeredDesign d = sample_design();
  d.objects[0].mask.set(d.objects[0].box.x2 + kMaskDilation - 1, 10);
  EXPECT_FALSE(has_code(check_design(d), "design.mask_outside_box"));
  d.objects[0].mask.set(d.objects[0].box.x2 + kMaskDilation, 10);
  EXPECT_TRUE(has_code(check_design(d), "design.mask_outside_box"));
}

TEST(Composite, ObjectOverBackgroundTextOnTop) {
  const LayeredDesign d = sample_design();
  const RasterImage c = composite(d);
  EXPECT_EQ(c.at(0, 0), (Rgba{200, 210, 220, 255}));
  EXPECT_EQ(c.at(10, 10), (Rgba{10, 120, 30, 255}));
  EXPECT_EQ(composite_without_text(d).at(45, 30), (Rgba{200, 210, 220, 255}));
  bool dark = false;
  for (int y = 20; y < 40; ++y) {
    for (int x = 30; x < 62; ++x) dark |= c.at(x, y).r < 100;
  }
  EXPECT_TRUE(dark);
}

TEST(Bundle, SaveLoadRoundTrip) {
  test_support::ScratchDir dir("bundle_rt");
  const LayeredDesign d = sample_design();
  save_bundle(d, dir.path());
  for (const char* f : {"manifest.json", "background.png", "object_0.png", "object_0_mask.png"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  EXPECT_EQ(load_bundle(dir.path()), d);
}

TEST(Bundle, ManifestListsLayersByZ) {
  test_support::ScratchDir dir("bundle_z");
  save_bundle(sample_design(), dir.path());
  const auto m = read_manifest(dir.path());
  EXPECT_EQ(m["format_version"], 1);
  ASSERT_EQ(m["layers"].size(), 3u);
  EXPECT_EQ(m["layers"][0]["kind"], "background");
  EXPECT_EQ(m["layers"][1]["kind"], "object");
  EXPECT_EQ(m["layers"][2]["kind"], "text");
  EXPECT_EQ(m["layers"][2]["content"], "HELLO");
  EXPECT_TRUE(check_manifest(m).empty());
}

TEST(Bundle, DetectsTamperedLayer) {
  test_support::ScratchDir dir("bundle_crc");
  save_bundle(sample_design(), dir.path());
  write_png(RasterImage({64, 48}, {1, 1, 1, 255}), dir / "background.png");
  try {
    load_bundle(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "bundle.checksum");
  }
}

TEST(Bundle, MissingManifest) {
  test_support::ScratchDir dir("bundle_missing");
  try {
    load_bundle(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "bundle.missing_manifest");
  }
}

TEST(Bundle, RejectsNewerFormat) {
  test_support::ScratchDir dir("bundle_version");
  save_bundle(sample_design(), dir.path());
  auto m = read_manifest(dir.path());
  m["format_version"] = 2;
  write_text_file(dir / "manifest.json", m.dump());
  try {
    load_bundle(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "bundle.version");
  }
}

TEST(Bundle, CheckManifestFlagsColorBin26) {
  test_support::ScratchDir dir("bundle_color");
  save_bundle(sample_design(), dir.path());
  auto m = read_manifest(dir.path());
  m["layers"][2]["color"][0] = 26;
  const auto v = check_manifest(m);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(has_code(v, "text.color_range"));
}

TEST(Preview, EmbedsRastersAndTextNodes) {
  const std::string html = preview_html(sample_design(), FontCatalog::builtin());
  EXPECT_NE(html.find("data:image/png;base64,"), std::string::npos);
  EXPECT_NE(html.find("HELLO"), std::string::npos);
  EXPECT_EQ(html.find("http://"), std::string::npos);
}
