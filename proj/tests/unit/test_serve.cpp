#include <gtest/gtest.h>

#include <thread>

#include <httplib.h>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/serve.hpp"
#include "support.hpp"

using namespace layerkit;
using nlohmann::json;

namespace {

LayeredDesign two_layer_design() {
  LayeredDesign d;
  d.canvas = {64, 64};
  d.background = RasterImage(d.canvas, {240, 230, 220, 255});
  ObjectLayer o;
  o.box = {4, 4, 20, 16};
  o.mask = Mask::from_box(d.canvas, o.box);
  o.image = cutout(RasterImage(d.canvas, {30, 60, 200, 255}), o.mask);
  d.objects.push_back(o);
  TextLayer t;
  t.box = {8, 32, 56, 56};
  t.content = "OPEN";
  t.color = {0, 0, 0, 25};
  t.font = "mono-regular";
  d.texts.push_back(t);
  return d;
}

struct Served {
  test_support::ScratchDir dir;
  BundleService service;
  explicit Served(const std::string& name) : dir(name), service((save_bundle(two_layer_design(), dir.path()), dir.path())) {}
  json manifest() const { return json::parse(service.get_manifest().body); }
};

std::string first_code(const ApiReply& r) { return json::parse(r.body)["violations"][0]["code"]; }

}  // namespace

TEST(BundleService, ConstructorRequiresBundle) {
  test_support::ScratchDir dir("serve_empty");
  EXPECT_THROW(BundleService{dir.path()}, Error);
}

TEST(BundleService, GetManifestAndLayer) {
  Served s("serve_get");
  const auto m = s.manifest();
  EXPECT_EQ(m["layers"].size(), 3u);
  const ApiReply layer = s.service.get_layer("background.png");
  EXPECT_EQ(layer.status, 200);
  EXPECT_EQ(layer.content_type, "image/png");
  const auto bytes = std::vector<std::uint8_t>(layer.body.begin(), layer.body.end());
  EXPECT_EQ(decode_png(bytes), two_layer_design().background);
}

TEST(BundleService, LayerPathTraversalIsNotFound) {
  Served s("serve_traversal");
  EXPECT_EQ(s.service.get_layer("../manifest.json").status, 404);
  EXPECT_EQ(s.service.get_layer("..%2Fx.png").status, 404);
  EXPECT_EQ(s.service.get_layer("manifest.json").status, 404);
  EXPECT_EQ(s.service.get_layer("nope.png").status, 404);
}

TEST(BundleService, TextColorEditPersists) {
  Served s("serve_color");
  const auto bg_before = read_file_bytes(s.dir / "background.png");
  const auto obj_before = read_file_bytes(s.dir / "object_0.png");
  auto m = s.manifest();
  m["layers"][2]["color"] = {25, 0, 0, 25};
  m["layers"][2]["content"] = "CLOSED";
  const ApiReply r = s.service.put_manifest(m.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const LayeredDesign d = load_bundle(s.dir.path());
  EXPECT_EQ(d.texts[0].color, (QuantColor{25, 0, 0, 25}));
  EXPECT_EQ(d.texts[0].content, "CLOSED");
  EXPECT_EQ(read_file_bytes(s.dir / "background.png"), bg_before);
  EXPECT_EQ(read_file_bytes(s.dir / "object_0.png"), obj_before);
}

TEST(BundleService, ColorBin26Is422AndLeavesBundle) {
  Served s("serve_bin26");
  const std::string before = s.service.get_manifest().body;
  auto m = s.manifest();
  m["layers"][2]["color"][0] = 26;
  const ApiReply r = s.service.put_manifest(m.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(first_code(r), "text.color_range");
  EXPECT_EQ(s.service.get_manifest().body, before);
}

TEST(BundleService, ObjectMoveShiftsPixels) {
  Served s("serve_move");
  auto m = s.manifest();
  m["layers"][1]["box"] = {10, 6, 26, 18};
  ASSERT_EQ(s.service.put_manifest(m.dump()).status, 200);
  const LayeredDesign d = load_bundle(s.dir.path());
  EXPECT_EQ(d.objects[0].box, (BoundingBox{10, 6, 26, 18}));
  EXPECT_TRUE(d.objects[0].mask.test(10, 6));
  EXPECT_FALSE(d.objects[0].mask.test(4, 4));
  EXPECT_EQ(d.objects[0].mask.area(), 16 * 12);
}

TEST(BundleService, ResizeIsRejected) {
  Served s("serve_resize");
  auto m = s.manifest();
  m["layers"][1]["box"] = {4, 4, 30, 16};
  const ApiReply r = s.service.put_manifest(m.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(first_code(r), "edit.resize_unsupported");
}

TEST(BundleService, DroppedObjectIsRejected) {
  Served s("serve_drop");
  auto m = s.manifest();
  m["layers"].erase(1);
  const ApiReply r = s.service.put_manifest(m.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(first_code(r), "edit.missing_layer");
}

TEST(BundleService, BadJsonIs400) {
  Served s("serve_badjson");
  EXPECT_EQ(s.service.put_manifest("{not json").status, 400);
}

TEST(BundleService, ObjectAboveTextIsRejected) {
  Served s("serve_reorder");
  auto m = s.manifest();
  m["layers"][1]["z"] = 2;
  m["layers"][2]["z"] = 1;
  const ApiReply r = s.service.put_manifest(m.dump());
  EXPECT_EQ(r.status, 422);
  EXPECT_EQ(first_code(r), "order.object_above_text");
}

TEST(BundleService, CompositeMatchesBundle) {
  Served s("serve_composite");
  const ApiReply r = s.service.post_composite();
  ASSERT_EQ(r.status, 200);
  const auto bytes = std::vector<std::uint8_t>(r.body.begin(), r.body.end());
  EXPECT_EQ(decode_png(bytes), composite(two_layer_design()));
  EXPECT_NE(s.service.get_preview().body.find("OPEN"), std::string::npos);
}

TEST(BundleService, OverHttp) {
  Served s("serve_http");
  httplib::Server server;
  s.service.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto got = client.Get("/api/manifest");
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  auto m = json::parse(got->body);
  m["layers"][2]["color"][2] = 99;
  auto put = client.Put("/api/manifest", m.dump(), "application/json");
  ASSERT_TRUE(put);
  EXPECT_EQ(put->status, 422);
  auto layer = client.Get("/api/layers/object_0_mask.png");
  ASSERT_TRUE(layer);
  EXPECT_EQ(layer->status, 200);
  server.stop();
  t.join();
}
