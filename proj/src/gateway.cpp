#include "layerkit/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "layerkit/codec.hpp"

namespace layerkit {

using nlohmann::json;

std::string_view to_string(ExpertRole role) noexcept {
  switch (role) {
    case ExpertRole::t2i: return "t2i";
    case ExpertRole::vlm: return "vlm";
    case ExpertRole::ocr: return "ocr";
    case ExpertRole::segment: return "segment";
    case ExpertRole::remove: return "remove";
  }
  return "vlm";
}

std::optional<ExpertRole> parse_role(std::string_view s) noexcept {
  for (ExpertRole r : kAllRoles) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

json default_parameters(ExpertRole role) {
  switch (role) {
    case ExpertRole::t2i:
      return {{"width", kT2iCanvas.width}, {"height", kT2iCanvas.height}, {"steps", 4}, {"max_prompt_tokens", 256}};
    case ExpertRole::vlm:
      return {{"max_new_tokens", kMaxPlanTokens}, {"image_side", kVlmImageSide}};
    case ExpertRole::ocr:
      return json::object();
    case ExpertRole::segment:
      return {{"model", "sam-vit-base"}};
    case ExpertRole::remove:
      return {{"prompt", "nothing in the image"}, {"size", 512}, {"n", kDefaultRemovalCandidates}};
  }
  return json::object();
}

ExpertEndpoint default_endpoint(ExpertRole role) {
  ExpertEndpoint e;
  e.role = role;
  e.defaults = default_parameters(role);
  return e;
}

HttpReply HttplibTransport::post(const std::string& base_url, const std::string& path, const std::string& body,
                                 const std::vector<std::pair<std::string, std::string>>& headers, double timeout_s) {
  httplib::Client client(base_url);
  if (!client.is_valid()) throw TransportError("invalid expert url '" + base_url + "'");
  const auto secs = static_cast<time_t>(timeout_s);
  const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers hdrs;
  for (const auto& [k, v] : headers) hdrs.emplace(k, v);
  auto res = client.Post(path, hdrs, body, "application/json");
  if (!res) throw TransportError(base_url + path + ": " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

HttpBackend::HttpBackend(ExpertEndpoint endpoint, std::shared_ptr<Transport> transport, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
  if (!transport_) transport_ = std::make_shared<HttplibTransport>();
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!(endpoint_.timeout_s > 0)) throw Error("expert.config", "timeout_s must be positive");
  if (endpoint_.retries < 0) throw Error("expert.config", "retries must be >= 0");
}

ExpertResponse HttpBackend::call(const ExpertRequest& request) {
  const std::string body = encode_request(request);
  const std::string path = "/v1/" + std::string(to_string(endpoint_.role));
  std::vector<std::pair<std::string, std::string>> headers;
  if (!endpoint_.bearer_token.empty()) headers.emplace_back("Authorization", "Bearer " + endpoint_.bearer_token);

  std::string last_error;
  auto delay = std::chrono::milliseconds(500);
  for (int attempt = 0; attempt <= endpoint_.retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(delay);
      delay *= 2;
    }
    ++attempts_;
    HttpReply reply;
    try {
      reply = transport_->post(endpoint_.url, path, body, headers, endpoint_.timeout_s);
    } catch (const TransportError& e) {
      last_error = e.what();
      continue;
    }
    if (reply.status >= 500) {
      last_error = "HTTP " + std::to_string(reply.status);
      continue;
    }
    if (reply.status != 200) {
      throw Error("expert.rejected", std::string(to_string(endpoint_.role)) + " expert answered HTTP " +
                                         std::to_string(reply.status) + ": " + reply.body.substr(0, 200));
    }
    ExpertResponse response = decode_response(endpoint_.role, reply.body);
    if (!response.request_id.empty() && response.request_id != request.request_id) {
      throw Error("expert.malformed", "response request_id does not match the request");
    }
    return response;
  }
  throw Error("expert.unreachable", std::string(to_string(endpoint_.role)) + " expert failed after " +
                                        std::to_string(endpoint_.retries + 1) + " attempts: " + last_error);
}

Gateway::Gateway(int max_in_flight) : in_flight_(std::clamp(max_in_flight, 1, 1024)) {
  for (ExpertRole r : kAllRoles) endpoints_[r] = default_endpoint(r);
}

void Gateway::set_backend(ExpertRole role, std::shared_ptr<ExpertBackend> backend) {
  backends_[role] = std::move(backend);
}

void Gateway::set_endpoint(const ExpertEndpoint& endpoint) {
  ExpertEndpoint merged = endpoint;
  json defaults = default_parameters(endpoint.role);
  if (endpoint.defaults.is_object()) defaults.update(endpoint.defaults);
  merged.defaults = std::move(defaults);
  endpoints_[endpoint.role] = std::move(merged);
}

const ExpertEndpoint& Gateway::endpoint(ExpertRole role) const { return endpoints_.at(role); }

bool Gateway::has_backend(ExpertRole role) const { return backends_.count(role) != 0; }

void Gateway::warn(std::string message) {
  std::lock_guard lock(warnings_mutex_);
  warnings_.push_back(std::move(message));
}

std::vector<std::string> Gateway::drain_warnings() {
  std::lock_guard lock(warnings_mutex_);
  return std::exchange(warnings_, {});
}

ExpertResponse Gateway::dispatch(ExpertRequest request) {
  auto it = backends_.find(request.role);
  if (it == backends_.end() || !it->second) {
    throw Error("expert.no_backend", "no backend configured for role " + std::string(to_string(request.role)));
  }
  json params = endpoints_.at(request.role).defaults;
  params.update(request.params);
  request.params = std::move(params);
  char id[48];
  std::snprintf(id, sizeof id, "%s-%06llu", std::string(to_string(request.role)).c_str(),
                static_cast<unsigned long long>(next_id_.fetch_add(1)));
  request.request_id = id;

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<1024>& sem;
    ~Release() { sem.release(); }
  } release{in_flight_};
  ExpertResponse response = it->second->call(request);
  for (auto& w : response.warnings) warn(std::string(to_string(request.role)) + ": " + w);
  return response;
}

namespace {
bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string truncate_to_chars(const std::string& s, std::size_t limit) {
  if (s.size() <= limit) return s;
  std::string cut = s.substr(0, limit);
  if (const auto space = cut.find_last_of(" \t\n"); space != std::string::npos && space > limit / 2) {
    cut.resize(space);
  }
  return cut;
}
}  // namespace

RasterImage Gateway::text_to_image(const std::string& prompt, Canvas canvas) {
  if (blank(prompt)) throw Error("expert.precondition", "text_to_image needs a non-empty prompt");
  const int cap = endpoint(ExpertRole::t2i).defaults.value("max_prompt_tokens", 256);
  std::string sent = prompt;
  if (estimate_tokens(prompt) > cap) {
    sent = truncate_to_chars(prompt, static_cast<std::size_t>(cap) * 4);
    warn("t2i: prompt of " + std::to_string(estimate_tokens(prompt)) + " tokens truncated to the " +
         std::to_string(cap) + "-token cap");
  }
  ExpertRequest req;
  req.role = ExpertRole::t2i;
  req.params = {{"prompt", sent}, {"width", canvas.width}, {"height", canvas.height}};
  ExpertResponse res = dispatch(std::move(req));
  if (res.images.empty()) throw Error("expert.malformed", "t2i response carries no image");
  RasterImage image = std::move(res.images.front());
  if (image.canvas() != canvas) {
    warn("t2i: resized " + std::to_string(image.width()) + "x" + std::to_string(image.height()) +
         " output to the requested canvas");
    image = resize_area(image, canvas);
  }
  return image;
}

std::string Gateway::vlm_complete(const RasterImage& image, const std::string& prompt, int max_new_tokens) {
  if (blank(prompt)) throw Error("expert.precondition", "vlm_complete needs a non-empty prompt");
  if (max_new_tokens < 1) throw Error("expert.precondition", "max_new_tokens must be positive");
  const int side = endpoint(ExpertRole::vlm).defaults.value("image_side", kVlmImageSide);
  ExpertRequest req;
  req.role = ExpertRole::vlm;
  req.params = {{"prompt", prompt}, {"max_new_tokens", max_new_tokens}};
  req.image = resize_longer_side(image, side);
  ExpertResponse res = dispatch(std::move(req));
  if (res.texts.empty()) throw Error("expert.malformed", "vlm response carries no text");
  std::string text = std::move(res.texts.front());
  if (estimate_tokens(text) > max_new_tokens) {
    text.resize(static_cast<std::size_t>(max_new_tokens) * 4);
    warn("vlm: completion truncated to " + std::to_string(max_new_tokens) + " tokens");
  }
  return text;
}

OcrResult Gateway::ocr(const RasterImage& image) {
  ExpertRequest req;
  req.role = ExpertRole::ocr;
  req.image = image;
  ExpertResponse res = dispatch(std::move(req));
  OcrResult out;
  for (auto& item : res.items) {
    const BoundingBox clipped = item.box.intersect({0, 0, image.width(), image.height()});
    OcrItem converted{std::move(item.text), box_canvas_to_plan(clipped, image.canvas())};
    if (clipped.empty() || converted.box.empty()) {
      warn("ocr: dropped degenerate box " + item.box.to_string());
      continue;
    }
    out.items.push_back(std::move(converted));
  }
  std::stable_sort(out.items.begin(), out.items.end(), [](const OcrItem& a, const OcrItem& b) {
    return a.box.y1 != b.box.y1 ? a.box.y1 < b.box.y1 : a.box.x1 < b.box.x1;
  });
  return out;
}

Mask Gateway::segment(const RasterImage& image, const BoundingBox& box) {
  if (!box.valid_within(image.width(), image.height())) {
    throw Error("expert.box_outside", "segment box " + box.to_string() + " is not inside the image");
  }
  ExpertRequest req;
  req.role = ExpertRole::segment;
  req.params = {{"box", json::array({box.x1, box.y1, box.x2, box.y2})}};
  req.image = image;
  ExpertResponse res = dispatch(std::move(req));
  if (res.images.empty()) throw Error("expert.malformed", "segment response carries no mask");
  if (res.images.front().canvas() != image.canvas()) {
    throw Error("expert.malformed", "segment mask size does not match the image");
  }
  const Mask raw = Mask::from_alpha(res.images.front());
  const Mask clipped = raw.clipped(box.expanded(kMaskDilation));
  if (clipped.area() != raw.area()) warn("segment: mask clipped to the dilated box");
  return clipped;
}

RemovalBatch Gateway::remove(const RasterImage& image, const Mask& mask, int n) {
  if (n < 1 || n > kMaxRemovalCandidates) {
    throw Error("expert.precondition", "removal candidate count must be in [1, 8], got " + std::to_string(n));
  }
  if (mask.canvas() != image.canvas()) throw Error("expert.precondition", "removal mask does not match the image");
  if (!mask.any()) throw Error("expert.empty_mask", "removal mask is empty");
  ExpertRequest req;
  req.role = ExpertRole::remove;
  req.params = {{"n", n}};
  req.image = image;
  req.mask = mask;
  ExpertResponse res = dispatch(std::move(req));
  if (static_cast<int>(res.images.size()) < n) {
    throw Error("expert.malformed", "removal returned " + std::to_string(res.images.size()) + " of " +
                                        std::to_string(n) + " candidates");
  }
  RemovalBatch batch;
  for (int k = 0; k < n; ++k) {
    RasterImage cand = std::move(res.images[k]);
    if (cand.canvas() != image.canvas()) throw Error("expert.malformed", "removal candidate size mismatch");
    for (int y = 0; y < image.height(); ++y) {
      for (int x = 0; x < image.width(); ++x) {
        if (!mask.test(x, y)) cand.at(x, y) = image.at(x, y);
      }
    }
    batch.candidates.push_back(std::move(cand));
  }
  return batch;
}

namespace {
std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

json parse_scalar(std::string_view v, int line_no) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    try {
      return json::parse(v);
    } catch (const json::parse_error&) {
      throw Error("config.syntax", "line " + std::to_string(line_no) + ": bad string literal");
    }
  }
  if (v == "true") return true;
  if (v == "false") return false;
  try {
    std::size_t used = 0;
    const std::string s(v);
    if (s.find_first_of(".eE") == std::string::npos) {
      const long long i = std::stoll(s, &used);
      if (used == s.size()) return i;
    } else {
      const double d = std::stod(s, &used);
      if (used == s.size()) return d;
    }
  } catch (const std::exception&) {
  }
  throw Error("config.syntax", "line " + std::to_string(line_no) + ": unsupported value '" + std::string(v) + "'");
}
}  // namespace

std::map<ExpertRole, ExpertEndpoint> parse_experts_config(std::string_view text) {
  std::map<ExpertRole, ExpertEndpoint> out;
  std::optional<ExpertRole> role;
  bool in_defaults = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw Error("config.syntax", "line " + std::to_string(line_no) + ": unterminated table");
      std::string_view name = trim(line.substr(1, line.size() - 2));
      in_defaults = false;
      if (name.size() > 9 && name.substr(name.size() - 9) == ".defaults") {
        name = name.substr(0, name.size() - 9);
        in_defaults = true;
      }
      role = parse_role(name);
      if (!role) throw Error("config.unknown_role", "line " + std::to_string(line_no) + ": unknown role '" + std::string(name) + "'");
      if (!out.count(*role)) out[*role] = default_endpoint(*role);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || !role) {
      throw Error("config.syntax", "line " + std::to_string(line_no) + ": expected key = value inside a [role] table");
    }
    const std::string key(trim(line.substr(0, eq)));
    const json value = parse_scalar(trim(line.substr(eq + 1)), line_no);
    ExpertEndpoint& ep = out[*role];
    if (in_defaults) {
      ep.defaults[key] = value;
    } else if (key == "url" && value.is_string()) {
      ep.url = value.get<std::string>();
    } else if (key == "timeout_s" && value.is_number()) {
      ep.timeout_s = value.get<double>();
    } else if (key == "retries" && value.is_number_integer()) {
      ep.retries = value.get<int>();
    } else if (key == "token" && value.is_string()) {
      ep.bearer_token = value.get<std::string>();
    } else {
      throw Error("config.unknown_key", "line " + std::to_string(line_no) + ": unsupported key '" + key + "'");
    }
    if (!(ep.timeout_s > 0)) throw Error("config.range", "timeout_s must be positive");
    if (ep.retries < 0) throw Error("config.range", "retries must be >= 0");
  }
  return out;
}

std::map<ExpertRole, ExpertEndpoint> load_experts_config(const std::filesystem::path& path) {
  return parse_experts_config(read_text_file(path));
}

std::shared_ptr<Gateway> make_http_gateway(const std::map<ExpertRole, ExpertEndpoint>& config,
                                           std::shared_ptr<Transport> transport, Sleeper sleeper) {
  auto gateway = std::make_shared<Gateway>();
  if (!transport) transport = std::make_shared<HttplibTransport>();
  for (const auto& [role, ep] : config) {
    if (ep.url.empty()) throw Error("config.missing_url", "role " + std::string(to_string(role)) + " has no url");
    gateway->set_endpoint(ep);
    gateway->set_backend(role, std::make_shared<HttpBackend>(ep, transport, sleeper));
  }
  return gateway;
}

}  // namespace layerkit
