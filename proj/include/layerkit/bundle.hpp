#pragma once

#include <filesystem>
#include <vector>

#include <json.hpp>

#include "layerkit/design.hpp"
#include "layerkit/error.hpp"

namespace layerkit {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

/// Writes manifest.json, background.png, object_<k>.png and object_<k>_mask.png.
void save_bundle(const LayeredDesign& design, const std::filesystem::path& dir);

/// Raises Error with codes bundle.missing_manifest, bundle.checksum,
/// bundle.version, bundle.schema.
LayeredDesign load_bundle(const std::filesystem::path& dir);

nlohmann::json read_manifest(const std::filesystem::path& dir);

/// Structural and range checks of a manifest document without touching files.
std::vector<Violation> check_manifest(const nlohmann::json& manifest);

nlohmann::json text_to_json(const TextLayer& text);
/// Reads text attributes from a manifest layer or plan element. Schema errors
/// are appended to `violations`; range checks are left to check_text_layer.
TextLayer text_from_json(const nlohmann::json& j, std::vector<Violation>& violations, const std::string& where);

nlohmann::json box_to_json(const BoundingBox& box);
BoundingBox box_from_json(const nlohmann::json& j);

}  // namespace layerkit
