#include "layerkit/mock_experts.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <regex>

#include <httplib.h>

#include "layerkit/bundle.hpp"
#include "layerkit/datagen.hpp"
#include "layerkit/questionnaire.hpp"
#include "layerkit/text_render.hpp"

namespace layerkit {

using nlohmann::json;

namespace {

constexpr Canvas kThumb{32, 32};

RasterImage squared(const RasterImage& image) {
  return image.width() == image.height() ? image : pad_to_square(image).first;
}

double thumb_distance(const RasterImage& a, const RasterImage& b) {
  double sum = 0;
  const auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    sum += std::abs(pa[i].r - pb[i].r) + std::abs(pa[i].g - pb[i].g) + std::abs(pa[i].b - pb[i].b);
  }
  return sum / (3.0 * static_cast<double>(pa.size()));
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string between(const std::string& s, std::string_view open, std::string_view close) {
  const auto a = s.find(open);
  if (a == std::string::npos) return {};
  const auto start = a + open.size();
  const auto b = s.find(close, start);
  return s.substr(start, b == std::string::npos ? std::string::npos : b - start);
}

const RasterImage& require_image(const ExpertRequest& r) {
  if (!r.image) throw Error("expert.precondition", std::string(to_string(r.role)) + " request needs an image");
  return *r.image;
}

}  // namespace

void FixtureRegistry::add(const RasterImage& image, const DesignPlan& plan, std::string description) {
  Entry e;
  e.thumb = resize_area(squared(image), kThumb);
  e.fixture.plan = plan;
  e.fixture.description = std::move(description);
  for (const auto& el : plan.elements) {
    if (el.kind == ElementKind::text) e.fixture.ocr.push_back({el.content, el.box});
  }
  std::stable_sort(e.fixture.ocr.begin(), e.fixture.ocr.end(), [](const OcrItem& a, const OcrItem& b) {
    return a.box.y1 != b.box.y1 ? a.box.y1 < b.box.y1 : a.box.x1 < b.box.x1;
  });
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(e));
}

std::optional<Fixture> FixtureRegistry::find(const RasterImage& image) const {
  if (image.empty()) return std::nullopt;
  const RasterImage thumb = resize_area(squared(image), kThumb);
  std::lock_guard lock(mutex_);
  const Entry* best = nullptr;
  double best_d = kMatchThreshold;
  for (const auto& e : entries_) {
    const double d = thumb_distance(thumb, e.thumb);
    if (d <= best_d) {
      best_d = d;
      best = &e;
    }
  }
  if (!best) return std::nullopt;
  return best->fixture;
}

std::size_t FixtureRegistry::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

RasterImage linear_fill(const RasterImage& image, const Mask& mask) {
  const int w = image.width(), h = image.height();
  RasterImage out = image;
  std::vector<char> resolved(static_cast<std::size_t>(h), 1);
  for (int y = 0; y < h; ++y) {
    int x = 0;
    while (x < w) {
      if (!mask.test(x, y)) {
        ++x;
        continue;
      }
      const int a = x;
      while (x < w && mask.test(x, y)) ++x;
      const int b = x;
      const bool has_l = a > 0, has_r = b < w;
      if (!has_l && !has_r) {
        resolved[y] = 0;
        break;
      }
      const Rgba l = has_l ? image.at(a - 1, y) : image.at(b, y);
      const Rgba r = has_r ? image.at(b, y) : image.at(a - 1, y);
      for (int xi = a; xi < b; ++xi) {
        const double t = double(xi - a + 1) / double(b - a + 1);
        auto mix = [t](int p, int q) { return static_cast<std::uint8_t>(std::lround(p + (q - p) * t)); };
        out.at(xi, y) = {mix(l.r, r.r), mix(l.g, r.g), mix(l.b, r.b), 255};
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    if (resolved[y]) continue;
    int src = -1;
    for (int d = 1; d < h && src < 0; ++d) {
      if (y - d >= 0 && resolved[y - d]) src = y - d;
      else if (y + d < h && resolved[y + d]) src = y + d;
    }
    for (int x = 0; x < w; ++x) {
      if (mask.test(x, y)) out.at(x, y) = src >= 0 ? out.at(x, src) : kPadGray;
    }
  }
  return out;
}

RasterImage mock_removal_candidate(const RasterImage& image, const Mask& mask, int k, std::uint64_t seed) {
  RasterImage out = linear_fill(image, mask);
  const int amp = k * kRemovalNoiseStep;
  if (amp == 0) return out;
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(k + 1)));
  std::uniform_int_distribution<int> noise(-amp, amp);
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      if (!mask.test(x, y)) continue;
      Rgba& p = out.at(x, y);
      auto add = [&](std::uint8_t c) { return static_cast<std::uint8_t>(std::clamp(c + noise(rng), 0, 255)); };
      p.r = add(p.r);
      p.g = add(p.g);
      p.b = add(p.b);
    }
  }
  return out;
}

MockT2i::MockT2i(std::shared_ptr<FixtureRegistry> registry, std::uint64_t seed)
    : registry_(std::move(registry)), seed_(seed) {}

ExpertResponse MockT2i::call(const ExpertRequest& request) {
  const std::string prompt = request.params.value("prompt", std::string{});
  if (prompt.empty()) throw Error("expert.precondition", "t2i request needs a prompt");
  SyntheticDesignSpec spec;
  spec.seed = fnv1a(prompt) ^ seed_;
  spec.canvas = {request.params.value("width", kT2iCanvas.width), request.params.value("height", kT2iCanvas.height)};
  spec.nonsensical_glyphs = true;
  SyntheticDesign sd = synth_design(spec);
  registry_->add(sd.reference, sd.plan, prompt);
  ExpertResponse r;
  r.request_id = request.request_id;
  r.images.push_back(std::move(sd.reference));
  return r;
}

MockVlm::MockVlm(std::shared_ptr<FixtureRegistry> registry) : registry_(std::move(registry)) {}

void MockVlm::script(const std::string& prompt_class, std::string reply) {
  std::lock_guard lock(mutex_);
  scripts_[prompt_class] = std::move(reply);
}

std::string MockVlm::classify(const std::string& prompt) {
  if (prompt.find("expand the original prompt") != std::string::npos) return "expand";
  if (prompt.find("placeholders for text") != std::string::npos) return "sketch";
  if (prompt.find("select the option (a, b, c, or d)") != std::string::npos) return "questionnaire";
  if (prompt.find("two designs with the same background") != std::string::npos) return "judge";
  if (prompt.find("graphic design") != std::string::npos) return "plan";
  return "other";
}

namespace {

std::string expansion_for(const std::string& intention) {
  return "A polished graphic design for \"" + intention +
         "\". A bold headline sits near the top, a short tagline runs below it, and a few simple geometric "
         "shapes accent a smooth gradient background.";
}

std::string sketch_description_for(const std::string& intention) {
  return "A layout sketch for \"" + intention +
         "\". The xxx placeholders become a headline and a supporting line of text, arranged around simple "
         "rectangular shapes on a plain background.";
}

// Smoothest masked region among the four option cells of a (possibly resized) grid.
int least_textured_option(const RasterImage& grid) {
  const int cw = grid.width() / 2, ch = grid.height() / 3;
  if (cw < 4 || ch < 4) return 0;
  const double scale = double(cw) / kGridCell;
  const int stamp = static_cast<int>(std::ceil((kLabelSize + 2) * scale));

  std::vector<char> region(static_cast<std::size_t>(cw) * ch, 0);
  bool any = false;
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const Rgba a = grid.at(x, y), b = grid.at(cw + x, y);
      const int diff = std::abs(a.r - b.r) + std::abs(a.g - b.g) + std::abs(a.b - b.b);
      if (diff > 12 && !(x < stamp && y < stamp)) {
        region[static_cast<std::size_t>(y) * cw + x] = 1;
        any = true;
      }
    }
  }
  auto in_region = [&](int x, int y) {
    if (x < stamp && y < stamp) return false;
    return !any || region[static_cast<std::size_t>(y) * cw + x] != 0;
  };

  int best = 0;
  double best_tv = 0;
  for (int opt = 0; opt < 4; ++opt) {
    const int x0 = (opt % 2) * cw, y0 = (1 + opt / 2) * ch;
    double tv = 0;
    for (int y = 0; y + 1 < ch; ++y) {
      for (int x = 0; x + 1 < cw; ++x) {
        if (!in_region(x, y)) continue;
        const Rgba p = grid.at(x0 + x, y0 + y), r = grid.at(x0 + x + 1, y0 + y), d = grid.at(x0 + x, y0 + y + 1);
        tv += std::abs(p.r - r.r) + std::abs(p.g - r.g) + std::abs(p.b - r.b);
        tv += std::abs(p.r - d.r) + std::abs(p.g - d.g) + std::abs(p.b - d.b);
      }
    }
    if (opt == 0 || tv < best_tv) {
      best_tv = tv;
      best = opt;
    }
  }
  return best;
}

}  // namespace

std::string MockVlm::plan_reply(const RasterImage& image, const std::string& prompt) const {
  if (auto f = registry_->find(image)) return serialize_plan(f->plan);

  DesignPlan plan;
  plan.elements.push_back(PlanElement{});
  double lum = 0;
  for (const auto& p : image.pixels()) lum += 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
  lum /= std::max<std::size_t>(1, image.pixels().size());
  const QuantColor ink = lum < 128 ? QuantColor{25, 25, 25, 25} : QuantColor{0, 0, 0, 25};

  if (prompt.find("Add text on the background") != std::string::npos) {
    std::string caption = between(prompt, "The caption of the image is ", "\n");
    std::vector<std::string> words;
    for (auto& w : split_words(caption)) {
      std::string clean;
      for (char c : w) {
        if (std::isalnum(static_cast<unsigned char>(c))) clean += c;
      }
      if (!clean.empty() && words.size() < 4) words.push_back(clean);
    }
    PlanElement t;
    t.kind = ElementKind::text;
    t.box = {48, 136, 288, 200};
    for (std::size_t i = 0; i < words.size(); ++i) t.content += (i ? " " : "") + words[i];
    if (t.content.empty()) t.content = "TEXT";
    t.color = ink;
    t.font = "mono-regular";
    t.lines = words.size() > 2 ? 2 : 1;
    plan.elements.push_back(t);
  } else {
    static const std::regex item(R"(\[(?:'((?:[^'\\]|\\.)*)', )?\((\d+), (\d+), (\d+), (\d+)\)\])");
    for (auto it = std::sregex_iterator(prompt.begin(), prompt.end(), item); it != std::sregex_iterator(); ++it) {
      const auto& m = *it;
      PlanElement t;
      t.kind = ElementKind::text;
      t.box = {std::stoi(m[2]), std::stoi(m[3]), std::stoi(m[4]), std::stoi(m[5])};
      t.content = m[1].matched && m[1].length() > 0 ? m[1].str() : "TEXT";
      t.color = ink;
      t.font = "mono-regular";
      if (!t.box.valid_within(kPlanSpace, kPlanSpace)) continue;
      plan.elements.push_back(t);
    }
  }
  return serialize_plan(plan);
}

ExpertResponse MockVlm::call(const ExpertRequest& request) {
  const std::string prompt = request.params.value("prompt", std::string{});
  if (prompt.empty()) throw Error("expert.precondition", "vlm request needs a prompt");
  const std::string cls = classify(prompt);
  ExpertResponse r;
  r.request_id = request.request_id;
  {
    std::lock_guard lock(mutex_);
    if (auto it = scripts_.find(cls); it != scripts_.end()) {
      r.texts.push_back(it->second);
      return r;
    }
  }
  if (cls == "expand") {
    r.texts.push_back(expansion_for(between(prompt, "given prompt \"", "\", please expand")));
  } else if (cls == "sketch") {
    r.texts.push_back(sketch_description_for(between(prompt, "this image is about \"", "\".")));
  } else if (cls == "questionnaire") {
    const int opt = least_textured_option(require_image(request));
    r.texts.push_back(std::string("The best option is (") + kOptionLetters[opt] + ").");
  } else if (cls == "judge") {
    r.texts.push_back("The left one is better.");
  } else if (cls == "plan") {
    r.texts.push_back(plan_reply(require_image(request), prompt));
  } else {
    r.texts.push_back("I can only describe graphic designs.");
  }
  return r;
}

MockOcr::MockOcr(std::shared_ptr<FixtureRegistry> registry) : registry_(std::move(registry)) {}

ExpertResponse MockOcr::call(const ExpertRequest& request) {
  const RasterImage& image = require_image(request);
  ExpertResponse r;
  r.request_id = request.request_id;
  const auto f = registry_->find(image);
  if (!f) return r;
  const int side = std::max(image.width(), image.height());
  const int ox = (side - image.width()) / 2, oy = (side - image.height()) / 2;
  const BoundingBox whole{0, 0, image.width(), image.height()};
  for (const auto& item : f->ocr) {
    const BoundingBox px = box_plan_to_canvas(item.box, {side, side}).translated(-ox, -oy).intersect(whole);
    if (!px.empty()) r.items.push_back({item.text, px});
  }
  return r;
}

ExpertResponse MockSegment::call(const ExpertRequest& request) {
  const RasterImage& image = require_image(request);
  BoundingBox box;
  try {
    box = box_from_json(request.params.at("box"));
  } catch (const std::exception&) {
    throw Error("expert.precondition", "segment request needs a box");
  }
  ExpertResponse r;
  r.request_id = request.request_id;
  r.images.push_back(Mask::from_box(image.canvas(), box.intersect({0, 0, image.width(), image.height()})).to_image());
  return r;
}

ExpertResponse MockRemove::call(const ExpertRequest& request) {
  const RasterImage& image = require_image(request);
  if (!request.mask) throw Error("expert.precondition", "remove request needs a mask");
  const int n = request.params.value("n", kDefaultRemovalCandidates);
  ExpertResponse r;
  r.request_id = request.request_id;
  const std::uint64_t seed = seed_ ^ fingerprint(image);
  for (int k = 0; k < n; ++k) r.images.push_back(mock_removal_candidate(image, *request.mask, k, seed));
  return r;
}

MockExperts make_mock_experts(std::uint64_t seed, std::shared_ptr<FixtureRegistry> registry) {
  if (!registry) registry = std::make_shared<FixtureRegistry>();
  MockExperts m;
  m.registry = registry;
  m.t2i = std::make_shared<MockT2i>(registry, seed);
  m.vlm = std::make_shared<MockVlm>(registry);
  m.ocr = std::make_shared<MockOcr>(registry);
  m.segment = std::make_shared<MockSegment>();
  m.remove = std::make_shared<MockRemove>(seed);
  return m;
}

std::shared_ptr<Gateway> make_mock_gateway(std::uint64_t seed, std::shared_ptr<FixtureRegistry> registry) {
  const MockExperts m = make_mock_experts(seed, std::move(registry));
  auto g = std::make_shared<Gateway>();
  g->set_backend(ExpertRole::t2i, m.t2i);
  g->set_backend(ExpertRole::vlm, m.vlm);
  g->set_backend(ExpertRole::ocr, m.ocr);
  g->set_backend(ExpertRole::segment, m.segment);
  g->set_backend(ExpertRole::remove, m.remove);
  return g;
}

struct MockExpertServer::Impl {
  httplib::Server server;
  std::thread thread;
  mutable std::mutex mutex;
  int fail_count = 0;
  int fail_status = 503;
  int served = 0;
  std::string authorization;
};

MockExpertServer::MockExpertServer(std::map<ExpertRole, std::shared_ptr<ExpertBackend>> backends)
    : impl_(std::make_unique<Impl>()) {
  for (auto& [role, backend] : backends) {
    const ExpertRole r = role;
    auto b = backend;
    impl_->server.Post("/v1/" + std::string(to_string(r)), [this, r, b](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(impl_->mutex);
        ++impl_->served;
        impl_->authorization = req.get_header_value("Authorization");
        if (impl_->fail_count > 0) {
          --impl_->fail_count;
          res.status = impl_->fail_status;
          res.set_content(R"({"error":"injected failure"})", "application/json");
          return;
        }
      }
      try {
        const ExpertRequest request = decode_request(r, req.body);
        ExpertResponse response = b->call(request);
        response.request_id = request.request_id;
        res.set_content(encode_response(r, response), "application/json");
      } catch (const Error& e) {
        res.status = 400;
        res.set_content(json{{"error", e.code()}, {"message", e.what()}}.dump(), "application/json");
      }
    });
  }
  port_ = impl_->server.bind_to_any_port("127.0.0.1");
  if (port_ <= 0) throw Error("expert.transport", "mock expert server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockExpertServer::~MockExpertServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockExpertServer::fail_next(int count, int status) {
  std::lock_guard lock(impl_->mutex);
  impl_->fail_count = count;
  impl_->fail_status = status;
}

int MockExpertServer::requests_served() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->served;
}

std::string MockExpertServer::last_authorization() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->authorization;
}

}  // namespace layerkit
