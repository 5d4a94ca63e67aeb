#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stabilens/cli.hpp"
#include "stabilens/dataset.hpp"
#include "stabilens/nerf_prep.hpp"
#include "stabilens/point_cloud.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using stabilens::testing::TempDir;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"stabilens"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = stabilens::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

std::size_t count_pngs(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ".png";
  return n;
}

// Small synthetic capture shared by every test.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = std::make_unique<TempDir>("cli");
    const CliRun r = cli({"synth", "--out", ds().string(), "--duration-s", "4", "--rgb-width", "160", "--rgb-height", "90",
                       "--depth-width", "80", "--depth-height", "72", "--test-poses", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { dir_.reset(); }

  static fs::path ds() { return *dir_ / "ds"; }
  static fs::path tmp(const std::string& rel) { return *dir_ / rel; }

  static inline std::unique_ptr<TempDir> dir_;
};

TEST_F(CliTest, SynthOutputPassesIngestValidate) {
  const CliRun r = cli({"ingest-validate", "--in", ds().string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("100 rgb frames, 20 depth frames"), std::string::npos) << r.out;
}

TEST_F(CliTest, ReconstructWritesNonEmptyCloud) {
  const fs::path ply = tmp("recon.ply");
  const CliRun r = cli({"reconstruct", "--in", ds().string(), "--out", ply.string(), "--voxel", "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_GT(stabilens::read_point_cloud_ply(ply).size(), 0u);
}

TEST_F(CliTest, ReconstructIsDeterministic) {
  const fs::path a = tmp("det_a.ply"), b = tmp("det_b.ply");
  ASSERT_EQ(cli({"reconstruct", "--in", ds().string(), "--out", a.string()}).code, 0);
  ASSERT_EQ(cli({"reconstruct", "--in", ds().string(), "--out", b.string()}).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(CliTest, RenderWritesOnePngPerPoseRow) {
  const fs::path ply = tmp("render_scene.ply"), out = tmp("render_out");
  ASSERT_EQ(cli({"reconstruct", "--in", ds().string(), "--out", ply.string()}).code, 0);
  const CliRun r = cli({"render", "--scene", ply.string(), "--poses", (ds() / "test" / "poses.csv").string(), "--out",
                     out.string(), "--fov-deg", "100", "--calib", (ds() / "calibration.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_pngs(out), 3u);
}

TEST_F(CliTest, EvalOnIdenticalDirectoriesReportsSsimOne) {
  const fs::path truth = ds() / "test" / "rgb";
  const fs::path csv = tmp("identical.csv");
  const CliRun r = cli({"eval", "--renders", truth.string(), "--truth", truth.string(), "--label", "same", "--csv",
                     csv.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "same: inf | 1.00\n");
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_NE(line.find(",inf,1"), std::string::npos) << line;
  }
  EXPECT_EQ(rows, 3);
}

TEST_F(CliTest, EvalMissingRenderIsPipelineError) {
  const CliRun r = cli({"eval", "--renders", tmp("nowhere").string(), "--truth", (ds() / "test" / "rgb").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(count_lines(r.err), 1) << r.err;
}

TEST_F(CliTest, UnknownFlagIsUsageError) {
  const CliRun r = cli({"reconstruct", "--in", ds().string(), "--out", tmp("x.ply").string(), "--bogus", "1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(count_lines(r.err), 1) << r.err;
  EXPECT_FALSE(fs::exists(tmp("x.ply")));
}

TEST_F(CliTest, UnknownSubcommandAndMissingRequiredAreUsageErrors) {
  EXPECT_EQ(cli({"teleport"}).code, 2);
  EXPECT_EQ(cli({}).code, 2);
  EXPECT_EQ(cli({"render", "--scene", "a.ply"}).code, 2);
}

TEST_F(CliTest, MissingDatasetIsPipelineError) {
  const CliRun r = cli({"reconstruct", "--in", tmp("absent").string(), "--out", tmp("y.ply").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(count_lines(r.err), 1) << r.err;
  EXPECT_NE(r.err.find("reconstruct"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero) {
  const CliRun r = cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("export-nerf"), std::string::npos);
}

TEST_F(CliTest, ConfigSetsUnsetFlagsAndCommandLineWins) {
  const fs::path cfg = tmp("cfg.txt");
  std::ofstream(cfg) << "# tuned\nvoxel = 0.5\nz_max = 0.2\nnot-a-flag = 3\n";
  // z-max 0.2 from the config leaves every depth pixel out of range
  const CliRun bad = cli({"reconstruct", "--config", cfg.string(), "--in", ds().string(), "--out", tmp("c1.ply").string()});
  EXPECT_EQ(bad.code, 1);

  const fs::path a = tmp("c2.ply"), b = tmp("c3.ply");
  ASSERT_EQ(cli({"reconstruct", "--in", ds().string(), "--out", a.string(), "--voxel", "0.5"}).code, 0);
  const CliRun r = cli({"reconstruct", "--config=" + cfg.string(), "--in", ds().string(), "--out", b.string(), "--z-max",
                     "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(CliTest, SelectFramesThenExportNerf) {
  const fs::path sel = tmp("sel"), nerf = tmp("nerf"), nerf2 = tmp("nerf2");
  CliRun r = cli({"select-frames", "--in", ds().string(), "--out", sel.string(), "--count", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_pngs(sel / "rgb"), 10u);
  EXPECT_EQ(stabilens::read_pose_csv(sel / "poses_rgb.csv", stabilens::FrameKind::kRgb).size(), 10u);

  r = cli({"export-nerf", "--in", sel.string(), "--out", nerf.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = stabilens::read_nerf_manifest(nerf / stabilens::kNerfManifestName);
  EXPECT_EQ(m.frames.size(), 10u);
  EXPECT_EQ(count_pngs(nerf / "images"), 10u);

  r = cli({"export-nerf", "--in", sel.string(), "--out", nerf2.string(), "--reuse-alignment",
           (nerf / stabilens::kNerfManifestName).string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(nerf / stabilens::kNerfManifestName), slurp(nerf2 / stabilens::kNerfManifestName));
}

TEST_F(CliTest, MeshFromReconstruction) {
  const fs::path ply = tmp("mesh_in.ply"), mesh = tmp("mesh_out.ply");
  ASSERT_EQ(cli({"reconstruct", "--in", ds().string(), "--out", ply.string(), "--voxel", "0.03"}).code, 0);
  const CliRun r = cli({"mesh", "--in", ply.string(), "--out", mesh.string(), "--depth", "6", "--dataset", ds().string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(mesh));
}

TEST_F(CliTest, ServeAndStreamLoopback) {
  const fs::path ply = tmp("serve_scene.ply"), frames = tmp("served");
  ASSERT_EQ(cli({"reconstruct", "--in", ds().string(), "--out", ply.string(), "--voxel", "0.03"}).code, 0);
  CliRun served;
  std::thread server([&] {
    served = cli({"serve", "--scene", ply.string(), "--listen", "127.0.0.1:9788", "--out", frames.string(), "--width",
                  "64", "--height", "48", "--accept-timeout-ms", "10000"});
  });
  const CliRun sent = cli({"stream", "--poses", (ds() / "test" / "poses.csv").string(), "--server", "127.0.0.1:9788",
                        "--rate-hz", "5"});
  server.join();
  EXPECT_EQ(sent.code, 0) << sent.err;
  EXPECT_EQ(served.code, 0) << served.err;
  EXPECT_NE(served.out.find("received 3, rendered 3, dropped 0"), std::string::npos) << served.out;
  EXPECT_EQ(count_pngs(frames), 3u);
}

}  // namespace
