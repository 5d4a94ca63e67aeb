#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "stabilens/dataset.hpp"
#include "test_util.hpp"

using namespace stabilens;
using stabilens::testing::TempDir;

namespace {

FrameRecord record(std::int64_t t, FrameKind kind = FrameKind::kRgb) {
  FrameRecord r;
  r.timestamp_us = t;
  r.kind = kind;
  r.image_path = frame_image_path(kind, t);
  return r;
}

// 10 RGB frames at 25 Hz and 2 depth frames at 5 Hz, with real images.
CaptureDataset write_fixture(const std::filesystem::path& root) {
  CaptureDataset ds;
  ds.root = root;
  ds.rgb_calib = {{50, 50, 16, 12, 32, 24}, {0.01, 0, 0, 0, 0}};
  ds.depth_calib = {{20, 20, 8, 8, 16, 16}, {}};
  for (int i = 0; i < 10; ++i) {
    FrameRecord r = record(1'000'000 + i * 40'000);
    r.pose = Pose::look_at({0.1 * i, 0, 1}, {0.1 * i, 2, 1});
    ds.rgb_frames.push_back(r);
  }
  for (int i = 0; i < 2; ++i) {
    FrameRecord r = record(1'000'000 + i * 200'000, FrameKind::kDepth);
    r.pose = Pose::look_at({0.5 * i, 0, 1}, {0.5 * i, 2, 1.5});
    ds.depth_frames.push_back(r);
  }
  save_dataset_metadata(ds, root);
  for (const auto& r : ds.rgb_frames) write_png_rgb(root / r.image_path, RgbImage(32, 24, 3, 128));
  for (const auto& r : ds.depth_frames) write_png_depth_mm(root / r.image_path, DepthImage(16, 16, 1, 1.5f));
  return ds;
}

}  // namespace

TEST(LoadDataset, ValidFixture) {
  TempDir dir("ds");
  const CaptureDataset written = write_fixture(dir.path());
  const CaptureDataset ds = load_dataset(dir.path(), {.check_images_eagerly = true});
  ASSERT_EQ(ds.rgb_frames.size(), 10u);
  ASSERT_EQ(ds.depth_frames.size(), 2u);
  EXPECT_EQ(ds.rgb_calib, written.rgb_calib);
  EXPECT_EQ(ds.depth_calib, written.depth_calib);
  const DepthImage depth = ds.load_depth(ds.depth_frames[0]);
  EXPECT_FLOAT_EQ(depth.at(3, 3), 1.5f);
  EXPECT_EQ(ds.load_rgb(ds.rgb_frames[4]).at(2, 2, 1), 128);
}

TEST(LoadDataset, SaveLoadIsIdentity) {
  TempDir dir("ds");
  const CaptureDataset written = write_fixture(dir.path());
  const CaptureDataset first = load_dataset(dir.path());
  TempDir copy("ds_copy");
  save_dataset_metadata(first, copy.path());
  std::filesystem::copy(dir / "rgb", copy / "rgb", std::filesystem::copy_options::recursive | std::filesystem::copy_options::overwrite_existing);
  std::filesystem::copy(dir / "depth", copy / "depth", std::filesystem::copy_options::recursive | std::filesystem::copy_options::overwrite_existing);
  const CaptureDataset second = load_dataset(copy.path());
  EXPECT_EQ(second.rgb_calib, written.rgb_calib);
  ASSERT_EQ(second.rgb_frames.size(), written.rgb_frames.size());
  for (std::size_t i = 0; i < written.rgb_frames.size(); ++i) {
    EXPECT_EQ(second.rgb_frames[i].timestamp_us, written.rgb_frames[i].timestamp_us);
    EXPECT_EQ(second.rgb_frames[i].image_path, written.rgb_frames[i].image_path);
    EXPECT_EQ(second.rgb_frames[i].pose.rotation(), written.rgb_frames[i].pose.rotation());
    EXPECT_EQ(second.rgb_frames[i].pose.translation(), written.rgb_frames[i].pose.translation());
  }
}

TEST(LoadDataset, MissingCalibration) {
  TempDir dir("ds");
  write_fixture(dir.path());
  std::filesystem::remove(dir / "calibration.json");
  EXPECT_THROW(load_dataset(dir.path()), FormatError);
}

TEST(LoadDataset, EmptyRgbDirectory) {
  TempDir dir("ds");
  write_fixture(dir.path());
  std::filesystem::remove_all(dir / "rgb");
  std::filesystem::create_directories(dir / "rgb");
  EXPECT_THROW(load_dataset(dir.path()), FormatError);
}

TEST(LoadDataset, ShuffledTimestampsReportFirstInversion) {
  TempDir dir("ds");
  CaptureDataset ds = write_fixture(dir.path());
  std::swap(ds.rgb_frames[3], ds.rgb_frames[4]);
  write_pose_csv(dir / "poses_rgb.csv", ds.rgb_frames);
  try {
    load_dataset(dir.path());
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("record 4"), std::string::npos) << e.what();
  }
}

TEST(LoadDataset, NonOrthonormalPoseRejected) {
  TempDir dir("ds");
  write_fixture(dir.path());
  std::ofstream(dir / "poses_depth.csv") << "timestamp_us,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n"
                                         << "5,2,0,0,0,1,0,0,0,1,0,0,0\n";
  EXPECT_THROW(load_dataset(dir.path()), FormatError);
}

TEST(LoadDataset, UnreadableImageNamesPath) {
  TempDir dir("ds");
  write_fixture(dir.path());
  const CaptureDataset ds = load_dataset(dir.path());
  std::filesystem::remove(dir.path() / ds.rgb_frames[2].image_path);
  try {
    ds.load_rgb(ds.rgb_frames[2]);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(ds.rgb_frames[2].image_path.filename().string()), std::string::npos);
  }
  EXPECT_THROW(load_dataset(dir.path(), {.check_images_eagerly = true}), FormatError);
  std::ofstream(dir.path() / ds.rgb_frames[3].image_path) << "not a png";
  EXPECT_THROW(ds.load_rgb(ds.rgb_frames[3]), IoError);
}

TEST(AssociateFrames, Examples) {
  const std::vector<FrameRecord> rgb{record(900'000), record(1'200'000)};
  EXPECT_EQ(associate_frames(record(1'000'000, FrameKind::kDepth), rgb).timestamp_us, 900'000);
  const std::vector<FrameRecord> tie{record(1'000'000), record(1'100'000)};
  EXPECT_EQ(associate_frames(record(1'050'000, FrameKind::kDepth), tie).timestamp_us, 1'000'000);
  EXPECT_EQ(associate_frames(record(5, FrameKind::kDepth), tie).timestamp_us, 1'000'000);
  EXPECT_EQ(associate_frames(record(9'000'000, FrameKind::kDepth), tie).timestamp_us, 1'100'000);
}

TEST(AssociateFrames, MatchesLinearScan) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::int64_t> t(0, 100'000'000);
  std::vector<std::int64_t> stamps(10'000);
  for (auto& s : stamps) s = t(rng);
  std::sort(stamps.begin(), stamps.end());
  stamps.erase(std::unique(stamps.begin(), stamps.end()), stamps.end());
  std::vector<FrameRecord> rgb;
  for (auto s : stamps) rgb.push_back(record(s));
  for (int q = 0; q < 10'000; ++q) {
    const FrameRecord depth = record(t(rng), FrameKind::kDepth);
    std::size_t best = 0;
    for (std::size_t i = 1; i < rgb.size(); ++i)
      if (std::llabs(rgb[i].timestamp_us - depth.timestamp_us) < std::llabs(rgb[best].timestamp_us - depth.timestamp_us))
        best = i;
    ASSERT_EQ(associate_frames(depth, rgb).timestamp_us, rgb[best].timestamp_us);
  }
}

TEST(AssociateFrames, MaxGapRejectsStaleMatches) {
  const std::vector<FrameRecord> rgb{record(0), record(1'000'000)};
  EXPECT_FALSE(associate_within(record(400'000, FrameKind::kDepth), rgb, 250'000));
  EXPECT_TRUE(associate_within(record(200'000, FrameKind::kDepth), rgb, 250'000));
}
