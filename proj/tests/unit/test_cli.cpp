#include <gtest/gtest.h>

#include <sstream>

#include "layerkit/bundle.hpp"
#include "layerkit/cli.hpp"
#include "layerkit/codec.hpp"
#include "layerkit/datagen.hpp"
#include "support.hpp"

using namespace layerkit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "layerkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
  const Outcome r = cli({});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: cli.usage: ", 0), 0u);
}

TEST(Cli, GenerateNeedsInput) {
  test_support::ScratchDir dir("cli_generate_empty");
  EXPECT_EQ(cli({"--out", dir.path().string(), "generate"}).code, 2);
}

TEST(Cli, AddTextNeedsDescription) {
  test_support::ScratchDir dir("cli_addtext");
  write_png(RasterImage({64, 64}, {90, 90, 90, 255}), dir / "bg.png");
  const Outcome r = cli({"--out", (dir / "out").string(), "addtext", (dir / "bg.png").string(), "--description", "  "});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("non-empty"), std::string::npos);
}

TEST(Cli, MissingInputImage) {
  test_support::ScratchDir dir("cli_missing");
  const Outcome r = cli({"--out", dir.path().string(), "unfold", (dir / "absent.png").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("does not exist"), std::string::npos);
}

TEST(Cli, BadCanvasIsUsageError) {
  test_support::ScratchDir dir("cli_canvas");
  EXPECT_EQ(cli({"--out", dir.path().string(), "--canvas", "wide", "generate", "a poster"}).code, 2);
}

TEST(Cli, GenerateWritesBundle) {
  test_support::ScratchDir dir("cli_generate");
  const Outcome r = cli({"--out", dir.path().string(), "--seed", "3", "generate", "a lemonade stand poster"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("background 1"), std::string::npos);
  for (const char* f : {"manifest.json", "background.png", "plan.json", "preview.html", "trace/trace.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "trace/timings.json"));
  const LayeredDesign d = load_bundle(dir.path());
  EXPECT_EQ(parse_plan(read_text_file(dir / "plan.json")).plan, plan_from_design(d));
}

TEST(Cli, UnfoldUsesSidecarPlan) {
  test_support::ScratchDir dir("cli_unfold");
  SyntheticDesignSpec spec;
  spec.seed = 14;
  const SyntheticDesign s = synth_design(spec);
  write_png(s.reference, dir / "ref.png");
  write_text_file(dir / "ref.plan.json", serialize_plan(s.plan));
  const Outcome r = cli({"--out", (dir / "out").string(), "unfold", (dir / "ref.png").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_plan(read_text_file(dir / "out/plan.json")).plan, s.plan);
  EXPECT_EQ(load_bundle(dir / "out").texts, s.design.texts);
}

TEST(Cli, EvalAgainstItselfScoresOne) {
  test_support::ScratchDir dir("cli_eval");
  ASSERT_EQ(cli({"--out", (dir / "pred/a").string(), "generate", "a concert flyer"}).code, 0);
  ASSERT_EQ(cli({"--out", (dir / "gt/a").string(), "generate", "a concert flyer"}).code, 0);
  const Outcome r = cli({"--out", (dir / "report").string(), "eval", "--pred", (dir / "pred").string(), "--gt",
                         (dir / "gt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("text_detection_f1 1\n"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(dir / "report/report.json"));
  EXPECT_TRUE(fs::exists(dir / "report/report.csv"));
}

TEST(Cli, DatagenWritesFourSamplesPerDesign) {
  test_support::ScratchDir dir("cli_datagen");
  const Outcome r = cli({"--out", dir.path().string(), "datagen", "--designs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("total 8\n"), std::string::npos) << r.out;
  EXPECT_EQ(count_manifest(dir / "manifest.jsonl").at("total"), 8);
}

TEST(Cli, DatagenNeedsExactlyOneSource) {
  test_support::ScratchDir dir("cli_datagen_usage");
  EXPECT_EQ(cli({"--out", dir.path().string(), "datagen"}).code, 2);
}

TEST(Cli, ServeRequiresBundle) {
  test_support::ScratchDir dir("cli_serve");
  EXPECT_EQ(cli({"serve", "--bundle", dir.path().string()}).code, 2);
}
