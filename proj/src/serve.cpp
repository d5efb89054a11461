#include "layerkit/serve.hpp"

#include <algorithm>
#include <map>

#include <httplib.h>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/design.hpp"
#include "layerkit/text_render.hpp"

namespace layerkit {

using nlohmann::json;

namespace {

ApiReply error_reply(int status, const std::string& code, const std::string& message) {
  return {status, json{{"error", code}, {"message", message}}.dump(), "application/json"};
}

ObjectLayer moved(const ObjectLayer& o, const BoundingBox& box, Canvas canvas) {
  const int dx = box.x1 - o.box.x1, dy = box.y1 - o.box.y1;
  if (dx == 0 && dy == 0) return o;
  ObjectLayer out;
  out.box = box;
  out.image = RasterImage(canvas);
  out.mask = Mask(canvas);
  for (int y = 0; y < canvas.height; ++y) {
    for (int x = 0; x < canvas.width; ++x) {
      const int sx = x - dx, sy = y - dy;
      if (sx < 0 || sy < 0 || sx >= canvas.width || sy >= canvas.height) continue;
      out.image.at(x, y) = o.image.at(sx, sy);
      if (o.mask.test(sx, sy)) out.mask.set(x, y);
    }
  }
  return out;
}

}  // namespace

ApiReply violations_reply(int status, const std::vector<Violation>& violations) {
  json items = json::array();
  for (const auto& v : violations) items.push_back({{"code", v.code}, {"message", v.message}});
  return {status, json{{"error", "validation.failed"}, {"violations", items}}.dump(), "application/json"};
}

BundleService::BundleService(std::filesystem::path bundle_dir) : dir_(std::move(bundle_dir)) {
  read_manifest(dir_);
}

ApiReply BundleService::get_manifest() const {
  std::shared_lock lock(mutex_);
  try {
    return {200, read_text_file(dir_ / kManifestName), "application/json"};
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
}

ApiReply BundleService::get_layer(const std::string& file) const {
  if (file.empty() || file.find('/') != std::string::npos || file.find("..") != std::string::npos ||
      file.size() < 5 || file.substr(file.size() - 4) != ".png") {
    return error_reply(404, "serve.not_found", "no such layer file");
  }
  std::shared_lock lock(mutex_);
  if (!std::filesystem::exists(dir_ / file)) return error_reply(404, "serve.not_found", "no such layer file");
  const auto bytes = read_file_bytes(dir_ / file);
  return {200, std::string(bytes.begin(), bytes.end()), "image/png"};
}

ApiReply BundleService::put_manifest(const std::string& body) {
  json m;
  try {
    m = json::parse(body);
  } catch (const json::parse_error& e) {
    return error_reply(400, "serve.bad_json", e.what());
  }
  if (auto v = check_manifest(m); !v.empty()) return violations_reply(422, v);

  std::unique_lock lock(mutex_);
  LayeredDesign current;
  json stored;
  try {
    current = load_bundle(dir_);
    stored = read_manifest(dir_);
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
  std::vector<Violation> v;
  const Canvas canvas{m["canvas"]["width"].get<int>(), m["canvas"]["height"].get<int>()};
  if (canvas != current.canvas) v.push_back({"edit.canvas", "canvas size cannot change"});

  std::map<std::string, std::size_t> object_by_file;
  std::string background_file;
  {
    std::vector<const json*> layers;
    for (const auto& l : stored["layers"]) layers.push_back(&l);
    std::stable_sort(layers.begin(), layers.end(),
                     [](const json* a, const json* b) { return (*a)["z"].get<int>() < (*b)["z"].get<int>(); });
    std::size_t k = 0;
    for (const json* l : layers) {
      const std::string kind = (*l)["kind"];
      if (kind == "object") object_by_file[(*l)["file"].get<std::string>()] = k++;
      if (kind == "background") background_file = (*l)["file"].get<std::string>();
    }
  }

  std::vector<const json*> layers;
  for (const auto& l : m["layers"]) layers.push_back(&l);
  std::stable_sort(layers.begin(), layers.end(),
                   [](const json* a, const json* b) { return (*a)["z"].get<int>() < (*b)["z"].get<int>(); });

  LayeredDesign next;
  next.canvas = current.canvas;
  next.background = current.background;
  std::map<std::string, int> used;
  for (const json* l : layers) {
    const std::string kind = (*l)["kind"];
    const std::string id = l->value("id", kind);
    if (kind == "background") {
      if ((*l)["file"].get<std::string>() != background_file) {
        v.push_back({"edit.background", "the background raster cannot be replaced"});
      }
    } else if (kind == "object") {
      const std::string file = (*l)["file"];
      auto it = object_by_file.find(file);
      if (it == object_by_file.end()) {
        v.push_back({"edit.unknown_layer", id + ": no object raster named " + file});
        continue;
      }
      if (used[file]++) {
        v.push_back({"edit.duplicate_layer", id + ": object " + file + " listed twice"});
        continue;
      }
      const ObjectLayer& o = current.objects[it->second];
      const BoundingBox box = box_from_json((*l)["box"]);
      if (box.width() != o.box.width() || box.height() != o.box.height()) {
        v.push_back({"edit.resize_unsupported", id + ": objects can move but not change size"});
        continue;
      }
      next.objects.push_back(moved(o, box, canvas));
    } else {
      std::vector<Violation> local;
      next.texts.push_back(text_from_json(*l, local, id));
      v.insert(v.end(), local.begin(), local.end());
    }
  }
  if (next.objects.size() != current.objects.size() && v.empty()) {
    v.push_back({"edit.missing_layer", "every object layer must stay in the manifest"});
  }
  if (v.empty()) {
    auto dv = check_design(next);
    v.insert(v.end(), dv.begin(), dv.end());
  }
  if (!v.empty()) return violations_reply(422, v);
  try {
    save_bundle(next, dir_);
    return {200, read_text_file(dir_ / kManifestName), "application/json"};
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
}

ApiReply BundleService::post_composite() const {
  std::shared_lock lock(mutex_);
  try {
    const auto png = encode_png(composite(load_bundle(dir_)));
    return {200, std::string(png.begin(), png.end()), "image/png"};
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
}

ApiReply BundleService::get_preview() const {
  std::shared_lock lock(mutex_);
  try {
    static const FontCatalog catalog = FontCatalog::builtin();
    return {200, preview_html(load_bundle(dir_), catalog), "text/html"};
  } catch (const Error& e) {
    return error_reply(500, e.code(), e.what());
  }
}

void BundleService::mount(httplib::Server& server, const std::filesystem::path& static_dir) {
  auto send = [](httplib::Response& res, const ApiReply& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/api/manifest", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_manifest()); });
  server.Get(R"(/api/layers/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_layer(req.matches[1]));
  });
  server.Put("/api/manifest",
             [this, send](const httplib::Request& req, httplib::Response& res) { send(res, put_manifest(req.body)); });
  server.Post("/api/composite", [this, send](const httplib::Request&, httplib::Response& res) { send(res, post_composite()); });
  server.Get("/preview", [this, send](const httplib::Request&, httplib::Response& res) { send(res, get_preview()); });
  if (!static_dir.empty() && std::filesystem::is_directory(static_dir)) server.set_mount_point("/", static_dir.string());
}

void serve_bundle(const std::filesystem::path& bundle_dir, const std::string& host, int port,
                  const std::filesystem::path& static_dir) {
  BundleService service(bundle_dir);
  httplib::Server server;
  service.mount(server, static_dir);
  if (!server.listen(host, port)) throw Error("serve.bind", "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace layerkit
