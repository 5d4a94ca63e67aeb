#include <fstream>

#include <gtest/gtest.h>

#include "stabilens/point_cloud.hpp"
#include "stabilens/synth.hpp"
#include "test_util.hpp"

using namespace stabilens;

namespace {

SynthOptions small_room(int depth_frames) {
  SynthOptions o;
  o.furniture = false;
  o.depth_hz = 5.0;
  o.duration_s = depth_frames / o.depth_hz;
  o.rgb_hz = 10.0;
  o.rgb_width = 320;
  o.rgb_height = 180;
  o.depth_width = 160;
  o.depth_height = 144;
  o.test_poses = 2;
  return o;
}

double distance_to_room_faces(const Vec3& p, const Vec3& size) {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) d = std::min({d, std::abs(p[a]), std::abs(size[a] - p[a])});
  return d;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Synth, OutputIsALoadableDataset) {
  stabilens::testing::TempDir dir("synth");
  const SynthOptions o = small_room(6);
  const SynthSummary s = generate_synthetic_room(dir.path(), o);
  EXPECT_EQ(s.depth_frames, 6u);
  EXPECT_EQ(s.rgb_frames, 12u);
  EXPECT_EQ(s.test_poses, 2u);
  LoadOptions eager;
  eager.check_images_eagerly = true;
  const CaptureDataset ds = load_dataset(dir.path(), eager);
  EXPECT_EQ(ds.rgb_frames.size(), 12u);
  EXPECT_EQ(ds.depth_frames.size(), 6u);
  EXPECT_EQ(ds.rgb_calib.intr.width, 320);
  EXPECT_NEAR(ds.rgb_calib.intr.hfov_deg(), kHoloLensHfovDeg, 1e-9);
  EXPECT_EQ(ds.load_depth(ds.depth_frames[0]).width(), 160);
  EXPECT_EQ(read_pose_csv(dir / "test/poses.csv", FrameKind::kRgb).size(), 2u);
  EXPECT_TRUE(std::filesystem::exists(dir / "room_mesh.ply"));
}

TEST(Synth, Deterministic) {
  stabilens::testing::TempDir a("synth_a"), b("synth_b");
  const SynthOptions o = small_room(2);
  generate_synthetic_room(a.path(), o);
  generate_synthetic_room(b.path(), o);
  for (const char* f : {"poses_rgb.csv", "poses_depth.csv", "calibration.json", "depth/200000.png", "rgb/100000.png",
                        "test/poses.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Synth, TrajectoryStaysInsideRoom) {
  const SynthOptions o;
  for (double t = 0; t < o.duration_s; t += 0.05) {
    const Vec3 c = synthetic_trajectory(t, o).center();
    EXPECT_GT(distance_to_room_faces(c, o.room_size), 0.5) << t;
  }
}

TEST(BuildSceneCloud, TexturedBoxPointsLieOnFaces) {
  stabilens::testing::TempDir dir("scene");
  const SynthOptions o = small_room(6);
  generate_synthetic_room(dir.path(), o);
  const SceneBuild b = build_scene_cloud(load_dataset(dir.path()));
  EXPECT_EQ(b.frames_merged, 6u);
  EXPECT_TRUE(b.warnings.empty());
  ASSERT_GT(b.cloud.size(), 1000u);
  ASSERT_TRUE(b.cloud.has_colors());
  double worst = 0;
  for (const auto& p : b.cloud.positions) worst = std::max(worst, distance_to_room_faces(p, o.room_size));
  EXPECT_LT(worst, 0.01);
}

TEST(BuildSceneCloud, CorruptFrameGivesOneWarning) {
  stabilens::testing::TempDir dir("scene_bad");
  generate_synthetic_room(dir.path(), small_room(6));
  const CaptureDataset ds = load_dataset(dir.path());
  std::ofstream(dir.path() / ds.depth_frames[3].image_path, std::ios::trunc) << "not a png";
  const SceneBuild b = build_scene_cloud(ds);
  EXPECT_EQ(b.frames_merged, 5u);
  ASSERT_EQ(b.warnings.size(), 1u);
  EXPECT_NE(b.warnings[0].find(std::to_string(ds.depth_frames[3].timestamp_us)), std::string::npos) << b.warnings[0];
}

TEST(BuildSceneCloud, AllFramesCorruptIsDegenerate) {
  stabilens::testing::TempDir dir("scene_dead");
  generate_synthetic_room(dir.path(), small_room(2));
  const CaptureDataset ds = load_dataset(dir.path());
  for (const auto& f : ds.depth_frames) std::filesystem::remove(dir.path() / f.image_path);
  EXPECT_THROW(build_scene_cloud(ds), DegenerateError);
}

TEST(BuildSceneCloud, BitIdenticalAcrossRuns) {
  stabilens::testing::TempDir dir("scene_det");
  generate_synthetic_room(dir.path(), small_room(4));
  const CaptureDataset ds = load_dataset(dir.path());
  const SceneBuild a = build_scene_cloud(ds), b = build_scene_cloud(ds);
  EXPECT_EQ(a.cloud.positions, b.cloud.positions);
  EXPECT_EQ(a.cloud.colors, b.cloud.colors);
}
