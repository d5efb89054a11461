#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "layerkit/image.hpp"

namespace layerkit {

/// PNG RGBA8 encoding. Decoding accepts any PNG libpng understands and
/// converts to RGBA8; failures raise Error("png.decode").
std::vector<std::uint8_t> encode_png(const RasterImage& image);
RasterImage decode_png(std::span<const std::uint8_t> data);

RasterImage read_png(const std::filesystem::path& path);
void write_png(const RasterImage& image, const std::filesystem::path& path);

std::string base64_encode(std::span<const std::uint8_t> data);
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::uint32_t crc32_of(std::span<const std::uint8_t> data);
std::string crc32_hex(std::span<const std::uint8_t> data);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> data);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace layerkit
