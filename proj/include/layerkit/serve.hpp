#pragma once

#include <filesystem>
#include <shared_mutex>
#include <string>
#include <vector>

#include "layerkit/error.hpp"

namespace httplib {
class Server;
}

namespace layerkit {

struct ApiReply {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// JSON-over-HTTP access to one bundle directory. Reads run concurrently;
/// writes are validated in full and serialized.
///
///   GET  /api/manifest          current manifest
///   GET  /api/layers/<file>     layer PNG
///   PUT  /api/manifest          text edits, object moves, reordering (422 + violations on failure)
///   POST /api/composite         PNG composite of the saved bundle
///   GET  /preview               self-contained HTML preview
class BundleService {
 public:
  explicit BundleService(std::filesystem::path bundle_dir);

  ApiReply get_manifest() const;
  ApiReply get_layer(const std::string& file) const;
  ApiReply put_manifest(const std::string& body);
  ApiReply post_composite() const;
  ApiReply get_preview() const;

  /// Registers the API routes, plus `static_dir` at "/" when it exists.
  void mount(httplib::Server& server, const std::filesystem::path& static_dir = {});

  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

ApiReply violations_reply(int status, const std::vector<Violation>& violations);

/// Blocks serving `bundle_dir` on host:port until the process is stopped.
void serve_bundle(const std::filesystem::path& bundle_dir, const std::string& host, int port,
                  const std::filesystem::path& static_dir = {});

}  // namespace layerkit
