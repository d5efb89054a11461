#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "layerkit/error.hpp"
#include "layerkit/image.hpp"
#include "layerkit/plan.hpp"

namespace layerkit {

enum class ExpertRole { t2i, vlm, ocr, segment, remove };

inline constexpr ExpertRole kAllRoles[] = {ExpertRole::t2i, ExpertRole::vlm, ExpertRole::ocr, ExpertRole::segment,
                                           ExpertRole::remove};

std::string_view to_string(ExpertRole role) noexcept;
std::optional<ExpertRole> parse_role(std::string_view s) noexcept;

struct ExpertEndpoint {
  ExpertRole role = ExpertRole::vlm;
  std::string url;  // base address, e.g. http://127.0.0.1:8700
  double timeout_s = 60.0;
  int retries = 2;
  nlohmann::json defaults = nlohmann::json::object();
  std::string bearer_token;
};

/// Role defaults: T2I 1024x1024 with 4 sampling steps and a 256-token prompt
/// cap; VLM 1536 new tokens on a 336-px image; removal prompt
/// "nothing in the image" with 4 candidates at 512 px.
nlohmann::json default_parameters(ExpertRole role);
ExpertEndpoint default_endpoint(ExpertRole role);

struct ExpertRequest {
  std::string request_id;
  ExpertRole role = ExpertRole::vlm;
  nlohmann::json params = nlohmann::json::object();
  std::optional<RasterImage> image;
  std::optional<Mask> mask;
};

struct ExpertResponse {
  std::string request_id;
  std::vector<std::string> texts;
  std::vector<RasterImage> images;
  /// OCR detections with boxes in pixels of the submitted image.
  std::vector<OcrItem> items;
  std::vector<std::string> warnings;
};

/// Anything that can answer an expert request: an HTTP client or an in-process mock.
class ExpertBackend {
 public:
  virtual ~ExpertBackend() = default;
  virtual ExpertResponse call(const ExpertRequest& request) = 0;
};

struct HttpReply {
  int status = 0;
  std::string body;
};

/// Raised by transports when the peer cannot be reached.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& message) : Error("expert.transport", message) {}
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post(const std::string& base_url, const std::string& path, const std::string& body,
                         const std::vector<std::pair<std::string, std::string>>& headers, double timeout_s) = 0;
};

/// cpp-httplib backed transport.
class HttplibTransport : public Transport {
 public:
  HttpReply post(const std::string& base_url, const std::string& path, const std::string& body,
                 const std::vector<std::pair<std::string, std::string>>& headers, double timeout_s) override;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// JSON-over-HTTP client for one role: POST {url}/v1/{role}. Retries
/// transport failures and 5xx replies with exponential backoff (0.5 s, x2).
class HttpBackend : public ExpertBackend {
 public:
  HttpBackend(ExpertEndpoint endpoint, std::shared_ptr<Transport> transport, Sleeper sleeper = {});

  ExpertResponse call(const ExpertRequest& request) override;

  int attempts_made() const noexcept { return attempts_.load(); }

 private:
  ExpertEndpoint endpoint_;
  std::shared_ptr<Transport> transport_;
  Sleeper sleeper_;
  std::atomic<int> attempts_{0};
};

struct RemovalBatch {
  std::vector<RasterImage> candidates;
};

inline constexpr int kMaxRemovalCandidates = 8;
inline constexpr int kDefaultRemovalCandidates = 4;
inline constexpr int kVlmImageSide = 336;
inline constexpr Canvas kT2iCanvas{1024, 1024};

/// Typed front door to the five expert roles. Enforces the contract on
/// every response regardless of backend: masks are clipped to the dilated
/// box, removal never changes pixels outside the mask, OCR boxes come back
/// sorted in plan space.
class Gateway {
 public:
  explicit Gateway(int max_in_flight = 8);

  void set_backend(ExpertRole role, std::shared_ptr<ExpertBackend> backend);
  void set_endpoint(const ExpertEndpoint& endpoint);
  const ExpertEndpoint& endpoint(ExpertRole role) const;
  bool has_backend(ExpertRole role) const;

  RasterImage text_to_image(const std::string& prompt, Canvas canvas = kT2iCanvas);
  std::string vlm_complete(const RasterImage& image, const std::string& prompt, int max_new_tokens = kMaxPlanTokens);
  OcrResult ocr(const RasterImage& image);
  Mask segment(const RasterImage& image, const BoundingBox& box);
  RemovalBatch remove(const RasterImage& image, const Mask& mask, int n = kDefaultRemovalCandidates);

  /// Warnings accumulated since the last drain (truncations, resizes, ...).
  std::vector<std::string> drain_warnings();

 private:
  ExpertResponse dispatch(ExpertRequest request);
  void warn(std::string message);

  std::map<ExpertRole, std::shared_ptr<ExpertBackend>> backends_;
  std::map<ExpertRole, ExpertEndpoint> endpoints_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::uint64_t> next_id_{0};
  std::mutex warnings_mutex_;
  std::vector<std::string> warnings_;
};

/// Parsed experts config: `[role]` sections with url, timeout_s, retries,
/// token and a `[role.defaults]` sub-table of scalar parameters.
std::map<ExpertRole, ExpertEndpoint> parse_experts_config(std::string_view text);
std::map<ExpertRole, ExpertEndpoint> load_experts_config(const std::filesystem::path& path);

/// Gateway whose configured roles talk HTTP through `transport`.
std::shared_ptr<Gateway> make_http_gateway(const std::map<ExpertRole, ExpertEndpoint>& config,
                                           std::shared_ptr<Transport> transport = nullptr,
                                           Sleeper sleeper = {});

/// Wire envelopes: {request_id, params, image_b64?, mask_b64?} ->
/// {request_id, outputs:[...], warnings:[...]}. Images travel as base64 PNG.
std::string encode_request(const ExpertRequest& request);
ExpertRequest decode_request(ExpertRole role, const std::string& body);
std::string encode_response(ExpertRole role, const ExpertResponse& response);
ExpertResponse decode_response(ExpertRole role, const std::string& body);

}  // namespace layerkit
