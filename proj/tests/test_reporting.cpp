#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dynlab/reporting.hpp"

using namespace dynlab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("dynlab_test_" + name);
  fs::remove_all(p);
  return p;
}

PipelineConfig small_config(const std::string& out) {
  PipelineConfig c;
  c.function = FunctionSpec::scaled_exp(1.0);
  c.r_min = 10;
  c.r_max = 1e3;
  c.resolution = 256;
  c.depth = 1;
  c.r0 = 50;
  c.windows = {{-2, -2, 2, 2}};
  c.epsilons = {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8};
  c.max_iter = 20;
  c.output_dir = out;
  return c;
}

}  // namespace

TEST(Hash, Fnv1aReferenceVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Render, PgmHeaderAndDiskFraction) {
  auto pgm = render_escape(FunctionSpec::polynomial({0.0, 0.0, 1.0}), {-2, -2, 2, 2}, 256, 256, 200);
  const std::string header = "P5\n256 256\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  ASSERT_EQ(pgm.size(), header.size() + 65536u);
  std::size_t dark = 0;
  for (std::size_t i = header.size(); i < pgm.size(); ++i) dark += pgm[i] == 0;
  // the filled Julia set of z^2 is the closed unit disk: area pi out of 16
  EXPECT_NEAR(static_cast<double>(dark) / 65536.0, 3.14159265358979 / 16, 0.005);
}

TEST(Render, Errors) {
  auto sq = FunctionSpec::polynomial({0.0, 0.0, 1.0});
  try {
    render_escape(sq, {-2, -2, 2, 2}, 10000, 10000, 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ResolutionCap);
  }
  EXPECT_THROW(render_escape(sq, {-2, -2, 2, 2}, 256, 128, 10), Error);
}

TEST(Csv, ProfilesAndBoxCounts) {
  RadiusProfile p;
  p.r = 10;
  p.log_M = 10;
  p.log_L = -10;
  p.T = 10 / 3.14159265358979;
  auto csv = profiles_csv({p});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "r,log_M,log_L,T,n0,N0,samples_per_circle,refined,ok");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  BoxCountCurve c;
  c.points = {{0.125, 10}, {0.25, 5}};
  EXPECT_EQ(boxcount_csv(c), "epsilon,N\n0.125,10\n0.25,5\n");
}

TEST(Config, ValidationRejectsBadFields) {
  auto base = json::parse(R"({"function":{"kind":"scaled_exp","params":{"lambda":1}}})");
  EXPECT_NO_THROW(PipelineConfig::from_json(base));
  for (const char* patch : {R"({"delta":0.3})", R"({"epsilons":[0.1,0.2]})", R"({"windows":[[0,0,-1,1]]})",
                            R"({"stages":["profile","paint"]})", R"({"stages":["classify"]})",
                            R"({"radius_grid":[100,10,8]})", R"({"epsilons":[0.125,0.25,0.5,0.75]})",
                            R"({"function":{"kind":"gamma"}})", R"({"max_iter":"many"})"}) {
    json j = base;
    j.merge_patch(json::parse(patch));
    try {
      PipelineConfig::from_json(j);
      ADD_FAILURE() << patch;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ConfigError) << patch;
    }
  }
}

TEST(Config, HashIgnoresOutputDirOnly) {
  auto a = small_config("x");
  auto b = small_config("y");
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 2;
  EXPECT_NE(a.hash(), b.hash());
  auto c = PipelineConfig::from_json(a.to_json());
  EXPECT_EQ(c.hash(), a.hash());
}

TEST(Pipeline, WritesEveryArtifactWithTheHash) {
  auto dir = scratch("artifacts");
  auto cfg = small_config(dir.string());
  auto res = run_pipeline(cfg);
  EXPECT_EQ(res.exit_code, 0);
  for (const char* f : {"profiles.csv", "growth_report.json", "construction_trace.json", "boxcount.json", "render.pgm",
                        "pipeline_report.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  for (const char* f : {"growth_report.json", "construction_trace.json", "boxcount.json"}) {
    auto j = json::parse(slurp(dir / f));
    EXPECT_EQ(j["config_hash"], cfg.hash()) << f;
  }
  auto report = json::parse(slurp(dir / "pipeline_report.json"));
  EXPECT_EQ(report["exit_code"], 0);
  EXPECT_EQ(report["stages"].size(), 5u);
  EXPECT_EQ(slurp(dir / "render.pgm").substr(0, 15), "P5\n256 256\n255\n");
  fs::remove_all(dir);
}

TEST(Pipeline, DegenerateRadiusGridFailsTheProfileStage) {
  auto dir = scratch("degenerate");
  auto cfg = small_config(dir.string());
  cfg.r_min = 1.0;
  cfg.stages = {"profile", "classify"};
  auto res = run_pipeline(cfg);
  EXPECT_NE(res.exit_code, 0);
  ASSERT_FALSE(res.stages.empty());
  EXPECT_FALSE(res.stages[0].ok);
  EXPECT_EQ(res.stages[0].error_kind, "DegenerateT");
  auto report = json::parse(slurp(dir / "pipeline_report.json"));
  EXPECT_EQ(report["stages"][0]["error"]["kind"], "DegenerateT");
  fs::remove_all(dir);
}

TEST(Pipeline, PolynomialGrowthExitsWithThree) {
  auto dir = scratch("cubic");
  auto cfg = small_config(dir.string());
  cfg.function = FunctionSpec::polynomial({0.0, 0.0, 0.0, 1.0});
  cfg.stages = {"profile", "classify"};
  EXPECT_EQ(run_pipeline(cfg).exit_code, 3);
  fs::remove_all(dir);
}

TEST(Pipeline, ByteIdenticalReruns) {
  auto d1 = scratch("det1"), d2 = scratch("det2");
  run_pipeline(small_config(d1.string()));
  run_pipeline(small_config(d2.string()));
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(d1)) {
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path().filename();
  }
  EXPECT_EQ(files, 6u);
  fs::remove_all(d1);
  fs::remove_all(d2);
}
