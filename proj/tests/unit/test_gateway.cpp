#include <gtest/gtest.h>

#include <deque>

#include "layerkit/gateway.hpp"
#include "layerkit/mock_experts.hpp"
#include "support.hpp"

using namespace layerkit;

namespace {

// Replies from a queue of HTTP statuses, echoing a valid envelope on 200.
class ScriptedTransport : public Transport {
 public:
  explicit ScriptedTransport(std::deque<int> statuses) : statuses_(std::move(statuses)) {}

  HttpReply post(const std::string&, const std::string& path, const std::string& body,
                 const std::vector<std::pair<std::string, std::string>>& headers, double) override {
    ++calls;
    last_path = path;
    last_headers = headers;
    const int status = statuses_.empty() ? 200 : statuses_.front();
    if (!statuses_.empty()) statuses_.pop_front();
    if (status == 0) throw TransportError("connection refused");
    if (status != 200) return {status, "busy"};
    const ExpertRequest req = decode_request(ExpertRole::vlm, body);
    last_params = req.params;
    ExpertResponse res;
    res.request_id = mismatch_id ? "other" : req.request_id;
    res.texts.push_back("ok");
    return {200, encode_response(ExpertRole::vlm, res)};
  }

  int calls = 0;
  bool mismatch_id = false;
  std::string last_path;
  std::vector<std::pair<std::string, std::string>> last_headers;
  nlohmann::json last_params;

 private:
  std::deque<int> statuses_;
};

struct Harness {
  std::shared_ptr<ScriptedTransport> transport;
  std::vector<std::chrono::milliseconds> sleeps;
  std::shared_ptr<Gateway> gateway;

  explicit Harness(std::deque<int> statuses, int retries = 2) {
    transport = std::make_shared<ScriptedTransport>(std::move(statuses));
    ExpertEndpoint ep = default_endpoint(ExpertRole::vlm);
    ep.url = "http://expert.invalid";
    ep.retries = retries;
    ep.bearer_token = "s3cret";
    gateway = make_http_gateway({{ExpertRole::vlm, ep}}, transport, [this](std::chrono::milliseconds d) { sleeps.push_back(d); });
  }
};

std::string error_code(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return "";
}

const RasterImage kImage({64, 64}, {10, 20, 30, 255});

}  // namespace

TEST(Defaults, RoleParameters) {
  EXPECT_EQ(default_parameters(ExpertRole::t2i)["steps"], 4);
  EXPECT_EQ(default_parameters(ExpertRole::t2i)["max_prompt_tokens"], 256);
  EXPECT_EQ(default_parameters(ExpertRole::t2i)["width"], 1024);
  EXPECT_EQ(default_parameters(ExpertRole::vlm)["max_new_tokens"], 1536);
  EXPECT_EQ(default_parameters(ExpertRole::vlm)["image_side"], 336);
  EXPECT_EQ(default_parameters(ExpertRole::remove)["prompt"], "nothing in the image");
  EXPECT_EQ(default_parameters(ExpertRole::remove)["n"], 4);
  EXPECT_EQ(parse_role("segment"), ExpertRole::segment);
  EXPECT_FALSE(parse_role("painter").has_value());
}

TEST(HttpBackendTest, RetriesWithDoublingBackoff) {
  Harness h({503, 0, 200});
  EXPECT_EQ(h.gateway->vlm_complete(kImage, "describe"), "ok");
  EXPECT_EQ(h.transport->calls, 3);
  EXPECT_EQ(h.sleeps, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(500), std::chrono::milliseconds(1000)}));
  EXPECT_EQ(h.transport->last_path, "/v1/vlm");
  ASSERT_EQ(h.transport->last_headers.size(), 1u);
  EXPECT_EQ(h.transport->last_headers[0].second, "Bearer s3cret");
}

TEST(HttpBackendTest, GivesUpAfterRetriesPlusOne) {
  Harness h({503, 503, 503, 200});
  EXPECT_EQ(error_code([&] { h.gateway->vlm_complete(kImage, "describe"); }), "expert.unreachable");
  EXPECT_EQ(h.transport->calls, 3);
}

TEST(HttpBackendTest, ClientErrorsAreNotRetried) {
  Harness h({400, 200});
  EXPECT_EQ(error_code([&] { h.gateway->vlm_complete(kImage, "describe"); }), "expert.rejected");
  EXPECT_EQ(h.transport->calls, 1);
}

TEST(HttpBackendTest, MismatchedRequestId) {
  Harness h({200});
  h.transport->mismatch_id = true;
  EXPECT_EQ(error_code([&] { h.gateway->vlm_complete(kImage, "describe"); }), "expert.malformed");
}

TEST(HttpBackendTest, DefaultsMergeUnderCallParams) {
  Harness h({200});
  h.gateway->vlm_complete(kImage, "describe", 16);
  EXPECT_EQ(h.transport->last_params["max_new_tokens"], 16);
  EXPECT_EQ(h.transport->last_params["image_side"], 336);
  EXPECT_EQ(h.transport->last_params["prompt"], "describe");
}

TEST(Wire, RequestRoundTrip) {
  ExpertRequest req;
  req.request_id = "remove-000007";
  req.role = ExpertRole::remove;
  req.params = {{"n", 3}};
  req.image = test_support::noise_image({9, 7}, 5);
  req.mask = Mask::from_box({9, 7}, {1, 1, 4, 4});
  const ExpertRequest back = decode_request(ExpertRole::remove, encode_request(req));
  EXPECT_EQ(back.request_id, req.request_id);
  EXPECT_EQ(back.params, req.params);
  EXPECT_EQ(*back.image, *req.image);
  EXPECT_EQ(*back.mask, *req.mask);
}

TEST(Wire, OcrResponseRoundTrip) {
  ExpertResponse res;
  res.request_id = "ocr-000001";
  res.items.push_back({"SALE", {1, 2, 30, 40}});
  res.items.push_back({std::nullopt, {5, 6, 7, 8}});
  res.warnings.push_back("low contrast");
  const ExpertResponse back = decode_response(ExpertRole::ocr, encode_response(ExpertRole::ocr, res));
  EXPECT_EQ(back.items, res.items);
  EXPECT_EQ(back.warnings, res.warnings);
  EXPECT_EQ(error_code([] { decode_response(ExpertRole::ocr, "{not json"); }), "expert.malformed");
}

namespace {

// Breaks every contract it can.
class SloppyBackend : public ExpertBackend {
 public:
  ExpertResponse call(const ExpertRequest& req) override {
    seen.push_back(req);
    ExpertResponse r;
    r.request_id = req.request_id;
    switch (req.role) {
      case ExpertRole::t2i: r.images.emplace_back(Canvas{100, 100}, Rgba{1, 2, 3, 255}); break;
      case ExpertRole::vlm: r.texts.push_back(std::string(100, 'x')); break;
      case ExpertRole::ocr:
        r.items.push_back({"LOW", {0, 400, 256, 512}});
        r.items.push_back({"TOP", {256, 0, 512, 64}});
        r.items.push_back({"GONE", {600, 600, 700, 700}});
        break;
      case ExpertRole::segment: r.images.emplace_back(req.image->canvas(), Rgba{255, 255, 255, 255}); break;
      case ExpertRole::remove:
        for (int k = 0; k < req.params["n"].get<int>(); ++k) r.images.emplace_back(req.image->canvas(), Rgba{0, 0, 0, 255});
        break;
    }
    return r;
  }
  std::vector<ExpertRequest> seen;
};

struct SloppyGateway {
  std::shared_ptr<SloppyBackend> backend = std::make_shared<SloppyBackend>();
  Gateway gateway;
  SloppyGateway() {
    for (ExpertRole r : kAllRoles) gateway.set_backend(r, backend);
  }
};

}  // namespace

TEST(GatewayContract, T2iPromptTruncatedAndOutputResized) {
  SloppyGateway s;
  std::string prompt;
  for (int i = 0; i < 300; ++i) prompt += "word ";
  const RasterImage img = s.gateway.text_to_image(prompt, {64, 32});
  EXPECT_EQ(img.canvas(), (Canvas{64, 32}));
  const std::string sent = s.backend->seen.back().params["prompt"];
  EXPECT_LE(sent.size(), 1024u);
  EXPECT_EQ(s.gateway.drain_warnings().size(), 2u);
  EXPECT_EQ(error_code([&] { s.gateway.text_to_image("   "); }), "expert.precondition");
}

TEST(GatewayContract, VlmImageResizedAndReplyTruncated) {
  SloppyGateway s;
  const std::string reply = s.gateway.vlm_complete(RasterImage({672, 336}), "describe", 4);
  EXPECT_EQ(reply.size(), 16u);
  EXPECT_EQ(s.backend->seen.back().image->canvas(), (Canvas{336, 168}));
  EXPECT_EQ(s.gateway.drain_warnings().size(), 1u);
}

TEST(GatewayContract, OcrSortedInPlanSpace) {
  SloppyGateway s;
  const OcrResult r = s.gateway.ocr(RasterImage({512, 512}));
  ASSERT_EQ(r.items.size(), 2u);
  EXPECT_EQ(r.items[0].text, "TOP");
  EXPECT_EQ(r.items[0].box, (BoundingBox{168, 0, 336, 42}));
  EXPECT_EQ(r.items[1].box, (BoundingBox{0, 263, 168, 336}));
}

TEST(GatewayContract, SegmentClippedToDilatedBox) {
  SloppyGateway s;
  const Mask m = s.gateway.segment(kImage, {10, 10, 20, 20});
  EXPECT_EQ(m.bounds(), (BoundingBox{6, 6, 24, 24}));
  EXPECT_EQ(error_code([&] { s.gateway.segment(kImage, {10, 10, 80, 20}); }), "expert.box_outside");
}

TEST(GatewayContract, RemovalNeverTouchesPixelsOutsideMask) {
  SloppyGateway s;
  const Mask mask = Mask::from_box(kImage.canvas(), {8, 8, 16, 16});
  const RemovalBatch b = s.gateway.remove(kImage, mask, 3);
  ASSERT_EQ(b.candidates.size(), 3u);
  EXPECT_EQ(b.candidates[0].at(0, 0), kImage.at(0, 0));
  EXPECT_EQ(b.candidates[0].at(10, 10), (Rgba{0, 0, 0, 255}));
  EXPECT_EQ(error_code([&] { s.gateway.remove(kImage, mask, 9); }), "expert.precondition");
  EXPECT_EQ(error_code([&] { s.gateway.remove(kImage, mask, 0); }), "expert.precondition");
  EXPECT_EQ(error_code([&] { s.gateway.remove(kImage, Mask(kImage.canvas()), 4); }), "expert.empty_mask");
}

TEST(GatewayContract, RequestIdsAreSequentialPerGateway) {
  SloppyGateway s;
  s.gateway.ocr(kImage);
  s.gateway.ocr(kImage);
  EXPECT_EQ(s.backend->seen[0].request_id, "ocr-000000");
  EXPECT_EQ(s.backend->seen[1].request_id, "ocr-000001");
}

TEST(GatewayContract, MissingBackend) {
  Gateway g;
  EXPECT_EQ(error_code([&] { g.ocr(kImage); }), "expert.no_backend");
}

TEST(ExpertsConfig, ParsesTables) {
  const auto cfg = parse_experts_config(R"(# experts
[vlm]
url = "http://127.0.0.1:8700"
timeout_s = 12.5
retries = 1
token = "abc"

[vlm.defaults]
temperature = 0.2

[remove]
url = "http://127.0.0.1:8701"
)");
  ASSERT_EQ(cfg.size(), 2u);
  const auto& vlm = cfg.at(ExpertRole::vlm);
  EXPECT_EQ(vlm.url, "http://127.0.0.1:8700");
  EXPECT_DOUBLE_EQ(vlm.timeout_s, 12.5);
  EXPECT_EQ(vlm.retries, 1);
  EXPECT_EQ(vlm.bearer_token, "abc");
  EXPECT_DOUBLE_EQ(vlm.defaults["temperature"].get<double>(), 0.2);
  EXPECT_EQ(cfg.at(ExpertRole::remove).retries, 2);
}

TEST(ExpertsConfig, ErrorCodes) {
  EXPECT_EQ(error_code([] { parse_experts_config("[painter]\nurl = \"x\"\n"); }), "config.unknown_role");
  EXPECT_EQ(error_code([] { parse_experts_config("url = \"x\"\n"); }), "config.syntax");
  EXPECT_EQ(error_code([] { parse_experts_config("[vlm]\ncolour = 1\n"); }), "config.unknown_key");
  EXPECT_EQ(error_code([] { parse_experts_config("[vlm]\nretries = -1\n"); }), "config.range");
  EXPECT_EQ(error_code([] { parse_experts_config("[vlm\n"); }), "config.syntax");
  EXPECT_EQ(error_code([] { make_http_gateway(parse_experts_config("[vlm]\nretries = 1\n")); }), "config.missing_url");
}

TEST(MockServer, HttpRoundTripWithFailureInjection) {
  auto experts = make_mock_experts(3);
  MockExpertServer server({{ExpertRole::vlm, experts.vlm}, {ExpertRole::segment, experts.segment}});
  ExpertEndpoint vlm = default_endpoint(ExpertRole::vlm);
  vlm.url = server.url();
  vlm.bearer_token = "tok";
  ExpertEndpoint seg = default_endpoint(ExpertRole::segment);
  seg.url = server.url();
  std::vector<std::chrono::milliseconds> sleeps;
  auto gateway = make_http_gateway({{ExpertRole::vlm, vlm}, {ExpertRole::segment, seg}}, nullptr,
                                   [&](std::chrono::milliseconds d) { sleeps.push_back(d); });
  server.fail_next(1, 503);
  const std::string reply = gateway->vlm_complete(kImage, "Your task is to expand the original prompt. \"a bakery\"");
  EXPECT_FALSE(reply.empty());
  EXPECT_EQ(sleeps.size(), 1u);
  EXPECT_EQ(server.requests_served(), 2);
  EXPECT_EQ(server.last_authorization(), "Bearer tok");
  EXPECT_EQ(gateway->segment(kImage, {4, 4, 12, 20}).area(), 8 * 16);
}
