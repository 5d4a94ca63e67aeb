#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "stabilens/nerf_prep.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace stabilens;

namespace {

RgbImage checkerboard(int w, int h, int square) {
  RgbImage img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = ((x / square + y / square) % 2) ? 255 : 0;
  return img;
}

RgbImage blurred(const RgbImage& img, double sigma) {
  const Image<double> b = gaussian_blur_channels(img, sigma);
  RgbImage out(img.width(), img.height(), img.channels());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.pixels()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(b.pixels()[i], 0.0, 255.0)));
  return out;
}

// Smooth gradients, disks and fine noise, standing in for a photograph.
RgbImage photo(int w, int h, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_int_distribution<int> noise(-12, 12);
  RgbImage img(w, h, 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool disk = std::hypot(x - w * 0.4, y - h * 0.5) < h * 0.3;
      for (int c = 0; c < 3; ++c) {
        const int base = disk ? 200 - 40 * c : (x * 255 / w + c * 60) % 256;
        img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(base + noise(rng), 0, 255));
      }
    }
  return img;
}

Pose random_pose(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-3, 3);
  const Vec3 eye(u(rng), u(rng), u(rng));
  return Pose::look_at(eye, eye + Vec3(u(rng), u(rng), 0.1 + std::abs(u(rng))));
}

}  // namespace

TEST(Sharpness, ConstantIsZero) { EXPECT_EQ(sharpness_score(RgbImage(20, 20, 3, 77)), 0.0); }

TEST(Sharpness, MatchesDirectDefinition) {
  const RgbImage img = photo(64, 48, 1);
  EXPECT_NEAR(sharpness_score(img), oracle::sharpness(img), 1e-9 * oracle::sharpness(img));
}

TEST(Sharpness, CheckerboardBeatsItsBlurs) {
  const RgbImage cb = checkerboard(40, 30, 1);
  const double s = sharpness_score(cb);
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) EXPECT_GT(s, sharpness_score(blurred(cb, sigma))) << sigma;
}

TEST(Sharpness, PhotoBeatsBlur) {
  const RgbImage p = photo(160, 120, 2);
  EXPECT_GT(sharpness_score(p), sharpness_score(blurred(p, 2.0)));
}

TEST(Sharpen, AlreadySharpIsUnchanged) {
  const RgbImage cb = checkerboard(32, 32, 1);
  const SharpenResult r = sharpen_to_threshold(cb, 150);
  EXPECT_EQ(r.amount, 0.0);
  EXPECT_TRUE(r.reached);
  EXPECT_TRUE(r.image == cb);
}

TEST(Sharpen, ConstantIsUnreached) {
  const SharpenResult r = sharpen_to_threshold(RgbImage(32, 32, 3, 128), 1.0);
  EXPECT_FALSE(r.reached);
  EXPECT_EQ(r.amount, 5.0);
  EXPECT_EQ(r.score, 0.0);
}

TEST(Sharpen, MildBlurReachesThresholdTightly) {
  const RgbImage soft = blurred(checkerboard(96, 96, 16), 2.5);
  ASSERT_LT(sharpness_score(soft), 150.0);
  const SharpenResult r = sharpen_to_threshold(soft, 150);
  EXPECT_TRUE(r.reached);
  EXPECT_GT(r.amount, 0.0);
  EXPECT_GE(sharpness_score(r.image), 150.0);
  EXPECT_LE(sharpness_score(r.image), 150.0 * 1.05);
}

TEST(Sharpen, ScoreMonotoneInAmountOnFixtures) {
  for (const RgbImage& img : {blurred(checkerboard(96, 96, 16), 2.5), blurred(photo(96, 72, 3), 2.0)}) {
    const Image<double> b = gaussian_blur_channels(img, 1.5);
    double prev = -1;
    for (double a = 0; a <= 5.0; a += 0.25) {
      RgbImage out(img.width(), img.height(), 3);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = img.pixels()[i] + a * (img.pixels()[i] - b.pixels()[i]);
        out.pixels()[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
      const double s = sharpness_score(out);
      EXPECT_GE(s, prev) << a;
      prev = s;
    }
  }
}

TEST(SelectFrames, GroupsPartitionWithEarlyRemainder) {
  const auto g = frame_groups(10, 3);
  ASSERT_EQ(g.size(), 3u);
  EXPECT_EQ(g[0], (std::pair<std::size_t, std::size_t>{0, 4}));
  EXPECT_EQ(g[1], (std::pair<std::size_t, std::size_t>{4, 7}));
  EXPECT_EQ(g[2], (std::pair<std::size_t, std::size_t>{7, 10}));
  EXPECT_THROW(frame_groups(2, 3), InvalidInput);
}

TEST(SelectFrames, ThousandFramesPerGroupArgmax) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> sig(0.3, 3.0);
  const RgbImage base = photo(48, 36, 4);
  std::vector<RgbImage> frames;
  for (int i = 0; i < 1000; ++i) frames.push_back(blurred(base, sig(rng)));
  const auto sel = select_sharp_frames(frames, 200, 1.0);
  ASSERT_EQ(sel.size(), 200u);
  for (std::size_t g = 0; g < 200; ++g) {
    std::size_t best = 5 * g;
    for (std::size_t i = 5 * g; i < 5 * g + 5; ++i)
      if (oracle::sharpness(frames[i]) > oracle::sharpness(frames[best])) best = i;
    EXPECT_EQ(sel[g].index, best) << g;
    if (g) EXPECT_GT(sel[g].index, sel[g - 1].index);
  }
}

TEST(SelectFrames, IdentityWhenNEqualsCount) {
  std::vector<RgbImage> frames;
  for (unsigned i = 0; i < 7; ++i) frames.push_back(photo(24, 24, i));
  const auto sel = select_sharp_frames(frames, 7, 1.0);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(sel[i].index, i);
    EXPECT_TRUE(sel[i].result.image == frames[i]);
  }
}

TEST(SelectFrames, TiesPickEarliest) {
  const std::vector<RgbImage> frames(10, photo(24, 24, 9));
  const auto sel = select_sharp_frames(frames, 3, 1.0);
  ASSERT_EQ(sel.size(), 3u);
  EXPECT_EQ(sel[0].index, 0u);
  EXPECT_EQ(sel[1].index, 4u);
  EXPECT_EQ(sel[2].index, 7u);
}

TEST(SelectFrames, SharpensBelowThreshold) {
  const std::vector<RgbImage> frames(4, blurred(checkerboard(64, 64, 16), 2.5));
  const auto sel = select_sharp_frames(frames, 2, 150);
  for (const auto& s : sel) {
    EXPECT_TRUE(s.sharpened());
    EXPECT_GE(sharpness_score(s.result.image), 150.0);
  }
}

TEST(SelectFrames, TooFewFrames) {
  const std::vector<RgbImage> frames(3, RgbImage(8, 8, 3));
  EXPECT_THROW(select_sharp_frames(frames, 4, 150), InvalidInput);
  EXPECT_THROW(select_sharp_frames(frames, 0, 150), InvalidInput);
}

TEST(Alignment, SpecExamples) {
  std::vector<Pose> a;
  for (const Vec3 c : {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0)}) a.emplace_back(Mat3::Identity(), c);
  const auto ta = compute_alignment(a);
  EXPECT_LT(ta.translation_offset.norm(), 1e-15);
  EXPECT_NEAR(ta.scale, 1.0, 1e-15);

  const std::vector<Pose> b{Pose(Mat3::Identity(), {2, 2, 2}), Pose(Mat3::Identity(), {4, 2, 2})};
  const auto tb = compute_alignment(b);
  EXPECT_TRUE(tb.translation_offset.isApprox(Vec3(-3, -2, -2), 1e-15));
  EXPECT_NEAR(tb.scale, 1.0, 1e-15);

  const std::vector<Pose> same(3, Pose(Mat3::Identity(), {5, 5, 5}));
  EXPECT_THROW(compute_alignment(same), DegenerateError);
  EXPECT_THROW(compute_alignment(std::span<const Pose>(same.data(), 1)), InvalidInput);
}

TEST(Alignment, CentredAndUnitMeanDistance) {
  std::mt19937_64 rng(21);
  std::vector<Pose> poses;
  for (int i = 0; i < 50; ++i) poses.push_back(random_pose(rng));
  const auto t = compute_alignment(poses);
  Vec3 centroid = Vec3::Zero();
  double mean = 0;
  for (const auto& p : poses) centroid += t.apply(p).topRightCorner<3, 1>();
  centroid /= 50;
  for (const auto& p : poses) mean += t.apply(p).topRightCorner<3, 1>().norm();
  EXPECT_LT(centroid.norm(), 1e-9);
  EXPECT_NEAR(mean / 50, 1.0, 1e-9);
}

TEST(NerfExport, IdentityPoseMatrix) {
  AlignmentTransform t;
  t.translation_offset = {1, 2, 3};
  t.scale = 0.5;
  const Eigen::Matrix4d m = t.apply(Pose());
  const Mat3 flip = Vec3(1, -1, -1).asDiagonal();
  EXPECT_TRUE((m.topLeftCorner<3, 3>().isApprox(flip)));
  EXPECT_TRUE((m.topRightCorner<3, 1>().isApprox(Vec3(0.5, 1, 1.5))));
  EXPECT_EQ(m.row(3), Eigen::RowVector4d(0, 0, 0, 1));
}

TEST(NerfExport, TrainThenTestShareAlignmentAndRoundTrip) {
  stabilens::testing::TempDir dir("nerf");
  std::mt19937_64 rng(5);
  std::vector<Pose> train, test;
  for (int i = 0; i < 12; ++i) train.push_back(random_pose(rng));
  for (int i = 0; i < 4; ++i) test.push_back(random_pose(rng));
  const CameraIntrinsics intr{300, 300, 159.5, 119.5, 320, 240};
  const RgbImage img = photo(320, 240, 6);
  const AlignmentTransform align = compute_alignment(train);
  auto frames_of = [&](const std::vector<Pose>& poses, const std::string& prefix) {
    std::vector<NerfExportFrame> f;
    for (std::size_t i = 0; i < poses.size(); ++i) f.push_back({prefix + std::to_string(i), &img, poses[i]});
    return f;
  };
  const auto train_path = export_nerf_dataset(frames_of(train, "train_"), align, intr, dir.path() / "train");
  const NerfManifest train_m = read_nerf_manifest(train_path);
  // The test split reuses whatever alignment was stored with the training export.
  const auto test_path =
      export_nerf_dataset(frames_of(test, "test_"), train_m.alignment, intr, dir.path() / "test");

  auto alignment_text = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in).at("alignment").dump();
  };
  EXPECT_EQ(alignment_text(train_path), alignment_text(test_path));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "test" / "images" / "test_3.png"));
  EXPECT_NEAR(train_m.intr.fx, 300, 0);
  {
    std::ifstream in(train_path);
    const auto j = nlohmann::json::parse(in);
    EXPECT_NEAR(j.at("camera_angle_x").get<double>(), 2 * std::atan(320.0 / 600.0), 1e-15);
    EXPECT_EQ(j.at("frames").size(), 12u);
  }

  // manifest -> poses -> manifest
  const std::vector<Pose> back = train_m.poses();
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_LT((back[i].rotation() - train[i].rotation()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((back[i].center() - train[i].center()).norm(), 1e-6);
  }
  const auto again = export_nerf_dataset(frames_of(back, "train_"), train_m.alignment, intr, dir.path() / "again");
  const NerfManifest again_m = read_nerf_manifest(again);
  for (std::size_t i = 0; i < train.size(); ++i)
    EXPECT_LT((again_m.frames[i].transform_matrix - train_m.frames[i].transform_matrix).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(NerfExport, UnwritableDirectoryNamesPath) {
  stabilens::testing::TempDir dir("nerf_bad");
  std::ofstream(dir.path() / "blocker") << "x";
  const RgbImage img(8, 8, 3);
  const std::vector<NerfExportFrame> f{{"a", &img, Pose()}};
  try {
    export_nerf_dataset(f, AlignmentTransform{}, {8, 8, 3.5, 3.5, 8, 8}, dir.path() / "blocker" / "out");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("blocker"), std::string::npos);
  }
}
