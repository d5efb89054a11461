#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/gateway.hpp"

namespace layerkit {

using nlohmann::json;

namespace {
std::string image_b64(const RasterImage& image) { return base64_encode(encode_png(image)); }

RasterImage image_from_b64(const json& v) {
  if (!v.is_string()) throw Error("expert.malformed", "image payload must be a base64 string");
  return decode_png(base64_decode(v.get<std::string>()));
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error("expert.malformed", std::string("envelope is not JSON: ") + e.what());
  }
}
}  // namespace

std::string encode_request(const ExpertRequest& request) {
  json j{{"request_id", request.request_id}, {"params", request.params}};
  if (request.image) j["image_b64"] = image_b64(*request.image);
  if (request.mask) j["mask_b64"] = image_b64(request.mask->to_image());
  return j.dump();
}

ExpertRequest decode_request(ExpertRole role, const std::string& body) {
  const json j = parse_body(body);
  if (!j.is_object()) throw Error("expert.malformed", "request envelope must be an object");
  ExpertRequest r;
  r.role = role;
  r.request_id = j.value("request_id", std::string{});
  r.params = j.value("params", json::object());
  if (j.contains("image_b64")) r.image = image_from_b64(j["image_b64"]);
  if (j.contains("mask_b64")) r.mask = Mask::from_alpha(image_from_b64(j["mask_b64"]));
  return r;
}

std::string encode_response(ExpertRole role, const ExpertResponse& response) {
  json outputs = json::array();
  switch (role) {
    case ExpertRole::t2i:
    case ExpertRole::remove:
      for (const auto& img : response.images) outputs.push_back({{"image_b64", image_b64(img)}});
      break;
    case ExpertRole::segment:
      for (const auto& img : response.images) outputs.push_back({{"mask_b64", image_b64(img)}});
      break;
    case ExpertRole::vlm:
      for (const auto& t : response.texts) outputs.push_back({{"text", t}});
      break;
    case ExpertRole::ocr:
      for (const auto& item : response.items) {
        outputs.push_back({{"text", item.text ? json(*item.text) : json(nullptr)}, {"box", box_to_json(item.box)}});
      }
      break;
  }
  return json{{"request_id", response.request_id}, {"outputs", outputs}, {"warnings", response.warnings}}.dump();
}

ExpertResponse decode_response(ExpertRole role, const std::string& body) {
  const json j = parse_body(body);
  if (!j.is_object() || !j.contains("outputs") || !j["outputs"].is_array()) {
    throw Error("expert.malformed", "response envelope lacks an outputs array");
  }
  ExpertResponse r;
  r.request_id = j.value("request_id", std::string{});
  if (j.contains("warnings") && j["warnings"].is_array()) {
    for (const auto& w : j["warnings"]) {
      if (w.is_string()) r.warnings.push_back(w.get<std::string>());
    }
  }
  for (const auto& out : j["outputs"]) {
    if (!out.is_object()) throw Error("expert.malformed", "each output must be an object");
    switch (role) {
      case ExpertRole::t2i:
      case ExpertRole::remove:
        r.images.push_back(image_from_b64(out.value("image_b64", json())));
        break;
      case ExpertRole::segment:
        r.images.push_back(image_from_b64(out.value("mask_b64", json())));
        break;
      case ExpertRole::vlm:
        if (!out.contains("text") || !out["text"].is_string()) throw Error("expert.malformed", "vlm output lacks text");
        r.texts.push_back(out["text"].get<std::string>());
        break;
      case ExpertRole::ocr: {
        OcrItem item;
        try {
          item.box = box_from_json(out.at("box"));
        } catch (const std::exception&) {
          throw Error("expert.malformed", "ocr output lacks a valid box");
        }
        if (out.contains("text") && out["text"].is_string()) item.text = out["text"].get<std::string>();
        r.items.push_back(std::move(item));
        break;
      }
    }
  }
  return r;
}

}  // namespace layerkit
