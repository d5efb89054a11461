#include "layerkit/bundle.hpp"

#include <algorithm>
#include <set>

#include "layerkit/codec.hpp"

namespace layerkit {

namespace fs = std::filesystem;
using nlohmann::json;

json box_to_json(const BoundingBox& box) { return json::array({box.x1, box.y1, box.x2, box.y2}); }

BoundingBox box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw Error("schema.box", "box must be an array of 4 integers");
  for (const auto& v : j) {
    if (!v.is_number_integer()) throw Error("schema.box", "box coordinates must be integers");
  }
  return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

json text_to_json(const TextLayer& t) {
  return json{{"box", box_to_json(t.box)},
              {"content", t.content},
              {"color", json::array({t.color.r, t.color.g, t.color.b, t.color.a})},
              {"font", t.font},
              {"alignment", std::string(to_string(t.alignment))},
              {"lines", t.line_count},
              {"angle", t.angle}};
}

TextLayer text_from_json(const json& j, std::vector<Violation>& violations, const std::string& where) {
  TextLayer t;
  auto fail = [&](const std::string& code, const std::string& msg) { violations.push_back({code, where + ": " + msg}); };
  if (!j.is_object()) {
    fail("schema.text", "text entry must be an object");
    return t;
  }
  try {
    t.box = box_from_json(j.at("box"));
  } catch (const std::exception&) {
    fail("schema.box", "missing or malformed box");
  }
  if (j.contains("content") && j["content"].is_string()) {
    t.content = j["content"].get<std::string>();
  } else {
    fail("schema.content", "content must be a string");
  }
  const auto color = j.value("color", json());
  if (color.is_array() && color.size() == 4 &&
      std::all_of(color.begin(), color.end(), [](const json& v) { return v.is_number_integer(); })) {
    t.color = {color[0].get<int>(), color[1].get<int>(), color[2].get<int>(), color[3].get<int>()};
  } else {
    fail("schema.color", "color must be an array of 4 integer bins");
  }
  if (j.contains("font") && j["font"].is_string()) {
    t.font = j["font"].get<std::string>();
  } else {
    fail("schema.font", "font must be a string");
  }
  const auto align = j.contains("alignment") && j["alignment"].is_string()
                         ? parse_alignment(j["alignment"].get<std::string>())
                         : std::nullopt;
  if (align) {
    t.alignment = *align;
  } else {
    fail("schema.alignment", "alignment must be one of left, center, right");
  }
  if (j.contains("lines") && j["lines"].is_number_integer()) {
    t.line_count = j["lines"].get<int>();
  } else {
    fail("schema.lines", "lines must be an integer");
  }
  if (j.contains("angle") && j["angle"].is_number_integer()) {
    t.angle = j["angle"].get<int>();
  } else {
    fail("schema.angle", "angle must be an integer");
  }
  return t;
}

void save_bundle(const LayeredDesign& design, const fs::path& dir) {
  validate_design(design);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("io.write", "cannot create bundle directory " + dir.string() + ": " + ec.message());

  json layers = json::array();
  int z = 0;
  const auto bg = encode_png(design.background);
  write_file_bytes(dir / "background.png", bg);
  layers.push_back({{"id", "background"}, {"kind", "background"}, {"z", z++}, {"file", "background.png"},
                    {"checksum", crc32_hex(bg)}});
  for (std::size_t k = 0; k < design.objects.size(); ++k) {
    const auto& o = design.objects[k];
    const std::string stem = "object_" + std::to_string(k);
    const auto img = encode_png(o.image);
    const auto mask = encode_png(o.mask.to_image());
    write_file_bytes(dir / (stem + ".png"), img);
    write_file_bytes(dir / (stem + "_mask.png"), mask);
    layers.push_back({{"id", stem},
                      {"kind", "object"},
                      {"z", z++},
                      {"box", box_to_json(o.box)},
                      {"file", stem + ".png"},
                      {"checksum", crc32_hex(img)},
                      {"mask_file", stem + "_mask.png"},
                      {"mask_checksum", crc32_hex(mask)}});
  }
  for (std::size_t k = 0; k < design.texts.size(); ++k) {
    json entry = text_to_json(design.texts[k]);
    entry["id"] = "text_" + std::to_string(k);
    entry["kind"] = "text";
    entry["z"] = z++;
    layers.push_back(std::move(entry));
  }
  const json manifest{{"format_version", kBundleFormatVersion},
                      {"canvas", {{"width", design.canvas.width}, {"height", design.canvas.height}}},
                      {"layers", std::move(layers)}};
  const fs::path tmp = dir / (std::string(kManifestName) + ".tmp");
  write_text_file(tmp, manifest.dump(2) + "\n");
  fs::rename(tmp, dir / kManifestName, ec);
  if (ec) throw Error("io.write", "cannot finalize manifest: " + ec.message());
}

json read_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) throw Error("bundle.missing_manifest", "no " + std::string(kManifestName) + " in " + dir.string());
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error("bundle.schema", path.string() + ": " + e.what());
  }
}

std::vector<Violation> check_manifest(const json& m) {
  std::vector<Violation> out;
  if (!m.is_object()) return {{"schema.manifest", "manifest must be an object"}};
  if (!m.contains("format_version") || !m["format_version"].is_number_integer()) {
    out.push_back({"schema.format_version", "format_version missing"});
  } else if (m["format_version"].get<int>() != kBundleFormatVersion) {
    out.push_back({"bundle.version", "unsupported format_version " + m["format_version"].dump()});
  }
  Canvas canvas;
  const auto c = m.value("canvas", json());
  if (c.is_object() && c.value("width", json()).is_number_integer() && c.value("height", json()).is_number_integer()) {
    canvas = {c["width"].get<int>(), c["height"].get<int>()};
  }
  if (canvas.width < 1 || canvas.height < 1) {
    out.push_back({"schema.canvas", "canvas must carry positive integer width and height"});
    return out;
  }
  const auto layers = m.value("layers", json());
  if (!layers.is_array() || layers.empty()) {
    out.push_back({"schema.layers", "layers must be a non-empty array"});
    return out;
  }
  std::vector<std::pair<int, const json*>> ordered;
  std::set<int> zs;
  for (const auto& layer : layers) {
    if (!layer.is_object() || !layer.value("z", json()).is_number_integer()) {
      out.push_back({"schema.layer", "every layer needs an integer z"});
      return out;
    }
    const int z = layer["z"].get<int>();
    if (!zs.insert(z).second) out.push_back({"order.duplicate_z", "duplicate z " + std::to_string(z)});
    ordered.emplace_back(z, &layer);
  }
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  int backgrounds = 0;
  bool seen_text = false;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const json& layer = *ordered[i].second;
    const std::string kind = layer.value("kind", std::string{});
    const std::string where = "layer z=" + std::to_string(ordered[i].first);
    if (kind == "background") {
      ++backgrounds;
      if (i != 0) out.push_back({"order.background_not_first", where + ": background must be the lowest layer"});
      if (!layer.value("file", json()).is_string()) out.push_back({"schema.file", where + ": background needs a file"});
    } else if (kind == "object") {
      if (seen_text) out.push_back({"order.object_above_text", where + ": objects must stack below all texts"});
      if (!layer.value("file", json()).is_string() || !layer.value("mask_file", json()).is_string()) {
        out.push_back({"schema.file", where + ": object needs file and mask_file"});
      }
      try {
        const auto box = box_from_json(layer.at("box"));
        if (!box.valid_within(canvas.width, canvas.height)) {
          out.push_back({"object.bad_box", where + ": box " + box.to_string() + " is not inside the canvas"});
        }
      } catch (const std::exception&) {
        out.push_back({"schema.box", where + ": missing or malformed box"});
      }
    } else if (kind == "text") {
      seen_text = true;
      std::vector<Violation> local;
      const TextLayer t = text_from_json(layer, local, where);
      if (local.empty()) local = check_text_layer(t, canvas, where);
      out.insert(out.end(), local.begin(), local.end());
    } else {
      out.push_back({"schema.kind", where + ": unknown layer kind '" + kind + "'"});
    }
  }
  if (backgrounds != 1) out.push_back({"order.background_count", "exactly one background layer is required"});
  return out;
}

namespace {
RasterImage load_checked(const fs::path& dir, const json& layer, const char* file_key, const char* sum_key) {
  const std::string name = layer.at(file_key).get<std::string>();
  if (name.find('/') != std::string::npos || name.find("..") != std::string::npos) {
    throw Error("bundle.schema", "layer file '" + name + "' must be a plain file name");
  }
  const fs::path path = dir / name;
  if (!fs::exists(path)) throw Error("bundle.missing_file", "missing layer file " + path.string());
  const auto bytes = read_file_bytes(path);
  if (layer.contains(sum_key)) {
    const std::string expected = layer[sum_key].get<std::string>();
    const std::string actual = crc32_hex(bytes);
    if (expected != actual) {
      throw Error("bundle.checksum", name + ": checksum " + actual + " does not match manifest " + expected);
    }
  }
  return decode_png(bytes);
}
}  // namespace

LayeredDesign load_bundle(const fs::path& dir) {
  const json m = read_manifest(dir);
  if (m.is_object() && m.value("format_version", json()).is_number_integer() &&
      m["format_version"].get<int>() != kBundleFormatVersion) {
    throw Error("bundle.version", "unsupported bundle format_version " + m["format_version"].dump());
  }
  auto violations = check_manifest(m);
  if (!violations.empty()) {
    std::string msg;
    for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v.code + ": " + v.message;
    throw Error("bundle.schema", msg);
  }
  LayeredDesign d;
  d.canvas = {m["canvas"]["width"].get<int>(), m["canvas"]["height"].get<int>()};
  std::vector<const json*> layers;
  for (const auto& layer : m["layers"]) layers.push_back(&layer);
  std::stable_sort(layers.begin(), layers.end(),
                   [](const json* a, const json* b) { return (*a)["z"].get<int>() < (*b)["z"].get<int>(); });
  for (const json* layer : layers) {
    const std::string kind = (*layer)["kind"].get<std::string>();
    if (kind == "background") {
      d.background = load_checked(dir, *layer, "file", "checksum");
    } else if (kind == "object") {
      ObjectLayer o;
      o.image = load_checked(dir, *layer, "file", "checksum");
      o.mask = Mask::from_alpha(load_checked(dir, *layer, "mask_file", "mask_checksum"));
      o.box = box_from_json((*layer)["box"]);
      d.objects.push_back(std::move(o));
    } else {
      std::vector<Violation> unused;
      d.texts.push_back(text_from_json(*layer, unused, "text"));
    }
  }
  validate_design(d);
  return d;
}

}  // namespace layerkit
