#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "layerkit/image.hpp"

namespace layerkit::test_support {

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("layerkit_unit_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline RasterImage noise_image(Canvas c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RasterImage img(c);
  for (auto& p : img.pixels()) {
    p = {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), 255};
  }
  return img;
}

}  // namespace layerkit::test_support
