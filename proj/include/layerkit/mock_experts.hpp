#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "layerkit/gateway.hpp"

namespace layerkit {

/// Ground truth attached to a known raster: the plan that produced it and
/// the text boxes a perfect OCR would report (plan space).
struct Fixture {
  DesignPlan plan;
  std::vector<OcrItem> ocr;
  std::string description;
};

/// Thread-safe lookup from images to fixtures. Images are matched by a
/// 32x32 area thumbnail so resized copies of a registered raster still hit.
/// Non-square images are keyed by their gray-padded square.
class FixtureRegistry {
 public:
  void add(const RasterImage& image, const DesignPlan& plan, std::string description = {});
  std::optional<Fixture> find(const RasterImage& image) const;
  std::size_t size() const;

  /// Mean absolute thumbnail difference accepted as a match.
  static constexpr double kMatchThreshold = 1.5;

 private:
  struct Entry {
    RasterImage thumb;
    Fixture fixture;
  };
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

/// Per-step noise level added to removal candidate k (amplitude k * step).
inline constexpr int kRemovalNoiseStep = 8;

/// Row-wise linear fill of masked pixels from the nearest unmasked
/// neighbours left and right; rows with no neighbour copy the nearest filled row.
RasterImage linear_fill(const RasterImage& image, const Mask& mask);

/// Removal candidate `k`: linear_fill plus uniform noise of amplitude
/// k * kRemovalNoiseStep inside the mask. Candidate 0 is noise-free.
RasterImage mock_removal_candidate(const RasterImage& image, const Mask& mask, int k, std::uint64_t seed);

class MockT2i : public ExpertBackend {
 public:
  MockT2i(std::shared_ptr<FixtureRegistry> registry, std::uint64_t seed);
  ExpertResponse call(const ExpertRequest& request) override;

 private:
  std::shared_ptr<FixtureRegistry> registry_;
  std::uint64_t seed_;
};

/// Answers by prompt class: intention expansion, sketch description, plan
/// (the registered ground truth, or a heuristic guess for unknown images),
/// questionnaire (the candidate with the smoothest masked region).
class MockVlm : public ExpertBackend {
 public:
  explicit MockVlm(std::shared_ptr<FixtureRegistry> registry);
  ExpertResponse call(const ExpertRequest& request) override;

  /// Canned reply for a prompt class: expand, sketch, plan, questionnaire, judge.
  void script(const std::string& prompt_class, std::string reply);

  static std::string classify(const std::string& prompt);

 private:
  std::string plan_reply(const RasterImage& image, const std::string& prompt) const;

  std::shared_ptr<FixtureRegistry> registry_;
  std::mutex mutex_;
  std::map<std::string, std::string> scripts_;
};

class MockOcr : public ExpertBackend {
 public:
  explicit MockOcr(std::shared_ptr<FixtureRegistry> registry);
  ExpertResponse call(const ExpertRequest& request) override;

 private:
  std::shared_ptr<FixtureRegistry> registry_;
};

/// Returns the exact box rectangle.
class MockSegment : public ExpertBackend {
 public:
  ExpertResponse call(const ExpertRequest& request) override;
};

class MockRemove : public ExpertBackend {
 public:
  explicit MockRemove(std::uint64_t seed) : seed_(seed) {}
  ExpertResponse call(const ExpertRequest& request) override;

 private:
  std::uint64_t seed_;
};

struct MockExperts {
  std::shared_ptr<FixtureRegistry> registry;
  std::shared_ptr<MockT2i> t2i;
  std::shared_ptr<MockVlm> vlm;
  std::shared_ptr<MockOcr> ocr;
  std::shared_ptr<MockSegment> segment;
  std::shared_ptr<MockRemove> remove;
};

MockExperts make_mock_experts(std::uint64_t seed, std::shared_ptr<FixtureRegistry> registry = nullptr);

/// Gateway with every role served in-process by the mocks.
std::shared_ptr<Gateway> make_mock_gateway(std::uint64_t seed, std::shared_ptr<FixtureRegistry> registry = nullptr);

/// HTTP server exposing backends over the wire contract on 127.0.0.1.
class MockExpertServer {
 public:
  explicit MockExpertServer(std::map<ExpertRole, std::shared_ptr<ExpertBackend>> backends);
  ~MockExpertServer();
  MockExpertServer(const MockExpertServer&) = delete;
  MockExpertServer& operator=(const MockExpertServer&) = delete;

  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  /// The next `count` requests are answered with HTTP `status`.
  void fail_next(int count, int status = 503);
  int requests_served() const;
  /// Authorization header of the most recent request.
  std::string last_authorization() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace layerkit
