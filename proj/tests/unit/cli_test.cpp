#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nowcast/raster.hpp"
#include "nowcast/text_io.hpp"
#include "nowcast_cli/commands.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "nowcast");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = nowcast::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("nowcast_cli_test_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    std::ofstream(dir_ / "scene.txt") << "width = 64\nheight = 64\nsteps = 7\narray_size = 9\nspacing = 5\n"
                                         "kernels = 3\ngrowth = stcar\nvelocity_x = 2\nvelocity_y = 1\nseed = 4\n";
    const auto r = run_cli({"synth", "--spec", (dir_ / "scene.txt").string(), "--out", (dir_ / "scene").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::vector<std::string> scans(int first, int last) {
    std::vector<std::string> out;
    for (int t = first; t <= last; ++t) {
      char name[32];
      std::snprintf(name, sizeof name, "scan_%03d.radar", t);
      out.push_back((dir_ / "scene" / name).string());
    }
    return out;
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, SynthWritesScansAndTruth) {
  for (const char* f : {"scan_000.radar", "scan_006.radar", "truth_velocity.csv", "truth_growth.csv", "truth_params.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "scene" / f)) << f;
  }
}

TEST_F(CliTest, MotionReportsModalVector) {
  auto args = std::vector<std::string>{"--array_size", "9", "motion"};
  for (const auto& s : scans(0, 1)) args.push_back(s);
  args.insert(args.end(), {"--out", (dir_ / "v.csv").string()});
  const auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("modal vector (1, 0.5) km/step"), std::string::npos) << r.out;
}

TEST_F(CliTest, FitForecastEvalChain) {
  const std::vector<std::string> common{"--array_size", "9", "--kernels", "3"};
  auto fit = common;
  fit.push_back("fit");
  for (const auto& s : scans(0, 4)) fit.push_back(s);
  fit.insert(fit.end(), {"--out", (dir_ / "model.fit").string()});
  const auto rf = run_cli(fit);
  ASSERT_EQ(rf.code, 0) << rf.err;
  EXPECT_NE(rf.out.find("r ="), std::string::npos);

  auto fc = common;
  fc.insert(fc.end(), {"--horizon", "2", "forecast"});
  for (const auto& s : scans(0, 4)) fc.push_back(s);
  fc.insert(fc.end(), {"--fit", (dir_ / "model.fit").string(), "--out", (dir_ / "fc").string()});
  const auto rc = run_cli(fc);
  ASSERT_EQ(rc.code, 0) << rc.err;
  const auto raster = nowcast::read_field(dir_ / "fc" / "stcar_h02.radar");
  EXPECT_EQ(raster.timestamp(), 6);
  const std::string text = nowcast::text::read_file(dir_ / "fc" / "persistence_h01.radar");
  EXPECT_NE(text.find("FORECAST method=persistence base=4 horizon=1"), std::string::npos);

  auto ev = common;
  ev.insert(ev.end(), {"eval", "--forecast", (dir_ / "fc" / "forecast.csv").string(), "--truth"});
  for (const auto& s : scans(5, 6)) ev.push_back(s);
  ev.insert(ev.end(), {"--out", (dir_ / "metrics.csv").string()});
  const auto re = run_cli(ev);
  ASSERT_EQ(re.code, 0) << re.err;
  EXPECT_NE(re.out.find("accumulative MSE"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "metrics.csv"));
}

TEST_F(CliTest, SixStepForecastTimestamps) {
  auto fc = std::vector<std::string>{"--array_size", "9", "forecast"};
  for (const auto& s : scans(0, 2)) fc.push_back(s);
  fc.insert(fc.end(), {"--method", "persistence", "--out", (dir_ / "p6").string()});
  const auto r = run_cli(fc);
  ASSERT_EQ(r.code, 0) << r.err;
  for (int m = 1; m <= 6; ++m) {
    char name[32];
    std::snprintf(name, sizeof name, "persistence_h%02d.radar", m);
    EXPECT_EQ(nowcast::read_field(dir_ / "p6" / name).timestamp(), 2 + m);
  }
}

TEST(Cli, ConvertMarshallPalmer) {
  const auto r = run_cli({"convert", "--dbz", "35"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("35 dBZ = 5.61"), std::string::npos) << r.out;
  EXPECT_EQ(run_cli({"convert"}).code, nowcast::cli::kExitConfig);
  EXPECT_EQ(run_cli({"convert", "--rain", "-1"}).code, nowcast::cli::kExitData);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run_cli({"--help"}).code, nowcast::cli::kExitOk);
  EXPECT_EQ(run_cli({}).code, nowcast::cli::kExitConfig);
  EXPECT_EQ(run_cli({"convert", "--bogus", "1"}).code, nowcast::cli::kExitConfig);
  EXPECT_EQ(run_cli({"--q", "0", "convert", "--dbz", "1"}).code, nowcast::cli::kExitOk);
  const auto missing = run_cli({"motion", "/nonexistent/a.radar", "/nonexistent/b.radar", "--out", "/tmp/x.csv"});
  EXPECT_EQ(missing.code, nowcast::cli::kExitData);
  EXPECT_NE(missing.err.find("/nonexistent/a.radar"), std::string::npos);
  const auto bad_cfg = run_cli({"--q", "0", "motion", "/nonexistent/a.radar", "/nonexistent/b.radar", "--out", "x"});
  EXPECT_EQ(bad_cfg.code, nowcast::cli::kExitConfig);
}

TEST(Cli, InsufficientHistory) {
  const auto r = run_cli({"--q", "4", "fit", "/nonexistent/a.radar", "--out", "/tmp/m.fit"});
  EXPECT_EQ(r.code, nowcast::cli::kExitData);
  EXPECT_NE(r.err.find("insufficient history"), std::string::npos);
}

}  // namespace
