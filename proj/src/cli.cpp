#include "layerkit/cli.hpp"

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <random>

#include <CLI11.hpp>

#include "layerkit/bundle.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/datagen.hpp"
#include "layerkit/metrics.hpp"
#include "layerkit/mock_experts.hpp"
#include "layerkit/pipeline.hpp"
#include "layerkit/serve.hpp"
#include "layerkit/text_render.hpp"

namespace layerkit {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string experts = "mock";
  std::string fonts;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::string canvas = "512x512";
  int verbosity = 0;
  bool timings = false;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error("cli.usage", message) {}
};

Canvas parse_canvas(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x != std::string::npos) {
      std::size_t a = 0, b = 0;
      const int w = std::stoi(s.substr(0, x), &a), h = std::stoi(s.substr(x + 1), &b);
      if (a == x && b == s.size() - x - 1 && w > 0 && h > 0) return {w, h};
    }
  } catch (const std::exception&) {
  }
  throw UsageError("--canvas expects WIDTHxHEIGHT, got '" + s + "'");
}

FontCatalog load_catalog(const Globals& g) { return g.fonts.empty() ? FontCatalog::builtin() : FontCatalog::load(g.fonts); }

struct Experts {
  std::shared_ptr<Gateway> gateway;
  std::shared_ptr<FixtureRegistry> registry;  // mock mode only
};

Experts make_experts(const Globals& g) {
  if (g.experts == "mock") {
    auto registry = std::make_shared<FixtureRegistry>();
    return {make_mock_gateway(g.seed, registry), registry};
  }
  if (!fs::exists(g.experts)) throw UsageError("experts config '" + g.experts + "' does not exist");
  return {make_http_gateway(load_experts_config(g.experts)), nullptr};
}

RasterImage read_input_png(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("input image '" + path + "' does not exist");
  return read_png(path);
}

void report(const PipelineResult& r, const Globals& g, std::ostream& out, std::ostream& err) {
  out << "background 1\n";
  for (std::size_t k = 0; k < r.design.objects.size(); ++k) {
    out << "object " << k << " " << r.design.objects[k].box.to_string() << "\n";
  }
  for (std::size_t k = 0; k < r.design.texts.size(); ++k) {
    const auto& t = r.design.texts[k];
    out << "text " << k << " " << t.box.to_string() << " " << std::quoted(t.content) << "\n";
  }
  out << "wrote " << (fs::path(g.out) / kManifestName).string() << "\n";
  if (g.verbosity > 0) {
    for (const auto& w : r.trace.warnings) err << "warning: " << w << "\n";
    for (const auto& n : r.trace.notes) err << "note: " << n << "\n";
  }
}

void write_outputs(const PipelineResult& r, const Globals& g, std::ostream& out, std::ostream& err) {
  const fs::path dir = g.out;
  const FontCatalog catalog = load_catalog(g);
  save_bundle(r.design, dir);
  write_text_file(dir / "plan.json", serialize_plan(r.plan) + "\n");
  r.trace.save(dir / "trace", g.timings);
  export_preview(r.design, dir / "preview.html", catalog);
  report(r, g, out, err);
}

PipelineResult run_pipeline(const PipelineRequest& req, Gateway& gateway, const Globals& g) {
  try {
    return run(req, gateway);
  } catch (const PipelineError& e) {
    e.trace().save(fs::path(g.out) / "trace", g.timings);
    throw;
  }
}

// Registers `<stem>.plan.json` next to a reference as its fixture so mock
// experts can answer for hand-made inputs.
void register_sidecar(const Experts& ex, const std::string& path, const RasterImage& image,
                      const std::optional<std::string>& description) {
  if (!ex.registry) return;
  const fs::path sidecar = fs::path(path).replace_extension(".plan.json");
  if (!fs::exists(sidecar)) return;
  ex.registry->add(image, parse_plan(read_text_file(sidecar)).plan, description.value_or(""));
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Turns raster graphic designs into editable layered designs.", "layerkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--experts", g.experts, "'mock' or a path to an experts config")->envname("LAYERKIT_EXPERTS");
  app.add_option("--fonts", g.fonts, "fonts.json catalog");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--seed", g.seed, "seed for mocks, datagen and shuffling");
  app.add_option("--canvas", g.canvas, "output canvas WIDTHxHEIGHT for generation");
  app.add_flag("-v,--verbose", g.verbosity, "print warnings and notes");
  app.add_flag("--timings", g.timings, "also write trace/timings.json");

  std::string intention, sketch;
  auto* generate = app.add_subcommand("generate", "intention or sketch -> layered design");
  generate->add_option("intention", intention, "short design intention");
  generate->add_option("--sketch", sketch, "sketch image (PNG)");

  std::string reference, description;
  bool original = false;
  auto* unfold = app.add_subcommand("unfold", "reference image -> layered design");
  unfold->add_option("reference", reference, "reference image (PNG)")->required();
  unfold->add_flag("--original", original, "treat the input as an existing design with readable text");
  unfold->add_option("--description", description, "caption of the design");

  std::string background;
  auto* addtext = app.add_subcommand("addtext", "add text to a background image");
  addtext->add_option("background", background, "background image (PNG)")->required();
  addtext->add_option("--description", description, "what the design is about");

  int n_designs = -1;
  std::string input_dir;
  auto* datagen = app.add_subcommand("datagen", "build a training manifest");
  datagen->add_option("--designs", n_designs, "number of synthetic designs");
  datagen->add_option("--input", input_dir, "directory of bundles");

  std::string pred_dir, gt_dir;
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  eval->add_option("--pred", pred_dir, "predicted bundles")->required();
  eval->add_option("--gt", gt_dir, "ground-truth bundles")->required();

  std::string bundle_dir, host = "127.0.0.1", static_dir;
  int port = 8765;
  auto* serve = app.add_subcommand("serve", "serve a bundle to the editor");
  serve->add_option("--bundle", bundle_dir, "bundle directory")->required();
  serve->add_option("--port", port, "TCP port")->envname("LAYERKIT_PORT");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--static", static_dir, "editor build to serve at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: cli.usage: " << one_line(e.what()) << "\n";
    return 2;
  }

  try {
    if (generate->parsed()) {
      if (intention.empty() && sketch.empty()) throw UsageError("generate needs an intention or --sketch");
      const Experts ex = make_experts(g);
      PipelineRequest req;
      req.seed = g.seed;
      req.canvas = parse_canvas(g.canvas);
      if (!intention.empty()) req.intention = intention;
      if (!sketch.empty()) {
        req.mode = PipelineMode::from_sketch;
        req.sketch = read_input_png(sketch);
      }
      write_outputs(run_pipeline(req, *ex.gateway, g), g, out, err);
    } else if (unfold->parsed()) {
      const Experts ex = make_experts(g);
      PipelineRequest req;
      req.mode = original ? PipelineMode::derender : PipelineMode::from_reference;
      req.seed = g.seed;
      req.reference = read_input_png(reference);
      if (!description.empty()) req.description = description;
      register_sidecar(ex, reference, *req.reference, req.description);
      write_outputs(run_pipeline(req, *ex.gateway, g), g, out, err);
    } else if (addtext->parsed()) {
      if (description.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw UsageError("addtext needs a non-empty --description");
      }
      const Experts ex = make_experts(g);
      PipelineRequest req;
      req.mode = PipelineMode::add_text_to_background;
      req.seed = g.seed;
      req.reference = read_input_png(background);
      req.description = description;
      register_sidecar(ex, background, *req.reference, req.description);
      write_outputs(run_pipeline(req, *ex.gateway, g), g, out, err);
    } else if (datagen->parsed()) {
      if ((n_designs < 0) == input_dir.empty()) throw UsageError("datagen needs exactly one of --designs N or --input DIR");
      std::vector<SyntheticDesign> designs;
      if (n_designs >= 0) {
        for (int i = 0; i < n_designs; ++i) {
          SyntheticDesignSpec spec;
          spec.seed = g.seed * 1000003ull + static_cast<std::uint64_t>(i);
          designs.push_back(synth_design(spec));
        }
      } else {
        if (!fs::is_directory(input_dir)) throw UsageError("--input '" + input_dir + "' is not a directory");
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(input_dir)) {
          if (e.is_directory() && fs::exists(e.path() / kManifestName)) dirs.push_back(e.path());
        }
        std::sort(dirs.begin(), dirs.end());
        if (dirs.empty()) throw UsageError("no bundles under '" + input_dir + "'");
        for (const auto& d : dirs) {
          SyntheticDesign sd;
          sd.design = load_bundle(d);
          sd.plan = plan_from_design(sd.design);
          sd.reference = composite(sd.design);
          sd.title = sd.design.texts.empty() ? d.filename().string() : sd.design.texts.front().content;
          sd.description = "A graphic design titled \"" + sd.title + "\".";
          designs.push_back(std::move(sd));
        }
      }
      const Experts ex = make_experts(g);
      MockInpainter inpainter;
      const Dataset ds = build_dataset(designs, *ex.gateway, inpainter, g.seed);
      const fs::path manifest = write_dataset(ds, g.out);
      const auto counts = count_manifest(manifest);
      for (const auto& [k, n] : counts) out << k << " " << n << "\n";
      if (auto v = check_manifest_counts(counts, static_cast<std::int64_t>(designs.size())); !v.empty()) {
        throw ValidationError(std::move(v));
      }
      out << "wrote " << manifest.string() << "\n";
    } else if (eval->parsed()) {
      if (!fs::is_directory(pred_dir) || !fs::is_directory(gt_dir)) throw UsageError("--pred and --gt must be directories");
      const EvalReport r = evaluate_dirs(pred_dir, gt_dir);
      fs::create_directories(g.out);
      write_text_file(fs::path(g.out) / "report.json", r.to_json().dump(2) + "\n");
      write_text_file(fs::path(g.out) / "report.csv", r.to_csv());
      for (const auto& [k, v] : r.summary()) out << k << " " << v << "\n";
      for (const auto& s : r.samples) {
        if (s.missing_prediction) out << "sample " << s.id << ": missing prediction\n";
        else if (s.pred_texts != s.gt_texts || s.pred_objects != s.gt_objects) {
          out << "sample " << s.id << ": texts " << s.pred_texts << "/" << s.gt_texts << ", objects " << s.pred_objects
              << "/" << s.gt_objects << "\n";
        }
      }
    } else if (serve->parsed()) {
      if (!fs::exists(fs::path(bundle_dir) / kManifestName)) throw UsageError("--bundle must be a bundle directory");
      out << "serving " << bundle_dir << " on http://" << host << ":" << port << "\n" << std::flush;
      serve_bundle(bundle_dir, host, port, static_dir);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.code() << ": " << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.code() << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

}  // namespace layerkit
