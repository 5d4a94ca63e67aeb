#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "stabilens/camera.hpp"

using namespace stabilens;

namespace {

CameraIntrinsics hd_camera() { return {500, 500, 640, 360, 1280, 720}; }

// Newton inversion of the hand-written Brown-Conrady forward model; used as an
// oracle independent of Distortion::undistort.
Vec2 newton_undistort(const Distortion& d, const Vec2& target) {
  auto forward = [&](double x, double y) {
    const double r2 = x * x + y * y;
    const double rad = 1 + d.k1 * r2 + d.k2 * r2 * r2 + d.k3 * r2 * r2 * r2;
    return Vec2(x * rad + 2 * d.p1 * x * y + d.p2 * (r2 + 2 * x * x),
                y * rad + d.p1 * (r2 + 2 * y * y) + 2 * d.p2 * x * y);
  };
  Vec2 q = target;
  for (int it = 0; it < 50; ++it) {
    const Vec2 f = forward(q.x(), q.y()) - target;
    const double h = 1e-7;
    Eigen::Matrix2d j;
    j.col(0) = (forward(q.x() + h, q.y()) - forward(q.x() - h, q.y())) / (2 * h);
    j.col(1) = (forward(q.x(), q.y() + h) - forward(q.x(), q.y() - h)) / (2 * h);
    q -= j.inverse() * f;
  }
  return q;
}

}  // namespace

TEST(ProjectPoint, OpticalAxisHitsPrincipalPoint) {
  const auto px = project_point({0, 0, 2}, hd_camera());
  ASSERT_TRUE(px);
  EXPECT_DOUBLE_EQ(px->x(), 640);
  EXPECT_DOUBLE_EQ(px->y(), 360);
}

TEST(ProjectPoint, OffAxisMatchesHandFormula) {
  const auto px = project_point({1, 0, 2}, hd_camera());
  ASSERT_TRUE(px);
  EXPECT_DOUBLE_EQ(px->x(), 640 + 500 * (1.0 / 2.0));
  EXPECT_DOUBLE_EQ(px->y(), 360);
}

TEST(ProjectPoint, BehindCamera) {
  EXPECT_FALSE(project_point({0, 0, -1}, hd_camera()));
  EXPECT_FALSE(project_point({0, 0, 1e-7}, hd_camera()));
}

TEST(BackProject, Examples) {
  const Vec3 a = back_project_pixel(640, 360, 2.0, hd_camera());
  EXPECT_NEAR((a - Vec3(0, 0, 2)).norm(), 0, 1e-12);
  const Vec3 b = back_project_pixel(1140, 360, 2.0, hd_camera());
  EXPECT_NEAR((b - Vec3((1140.0 - 640.0) / 500.0 * 2.0, 0, 2)).norm(), 0, 1e-12);
  EXPECT_THROW(back_project_pixel(640, 360, 0.0, hd_camera()), InvalidInput);
  EXPECT_THROW(back_project_pixel(640, 360, -1.0, hd_camera()), InvalidInput);
}

TEST(BackProject, RoundTripRandomPoints) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unit(-1, 1), depth(0.3, 10);
  const CameraIntrinsics intr = hd_camera();
  const Distortion none;
  const Distortion lens{0.05, -0.01, 0.001, 0.0005, -0.0003};
  for (int i = 0; i < 1000; ++i) {
    const double z = depth(rng);
    // Inside roughly 90% of the frustum.
    const Vec3 p(unit(rng) * 0.9 * (640.0 / 500.0) * z, unit(rng) * 0.9 * (360.0 / 500.0) * z, z);
    const auto px = project_point(p, intr, none);
    ASSERT_TRUE(px);
    EXPECT_LT((back_project_pixel(px->x(), px->y(), z, intr, none) - p).norm(), 1e-5);
    const auto pd = project_point(p, intr, lens);
    ASSERT_TRUE(pd);
    EXPECT_LT((back_project_pixel(pd->x(), pd->y(), z, intr, lens) - p).norm(), 1e-3);
    const Vec3 back = back_project_pixel(px->x(), px->y(), z, intr, none);
    const auto again = project_point(back, intr, none);
    EXPECT_LT((*again - *px).norm(), 1e-4);
  }
}

TEST(Distortion, FixedPointMatchesNewtonOracle) {
  const Distortion lens{0.1, -0.02, 0.003, 0.001, -0.002};
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int i = 0; i < 200; ++i) {
    const Vec2 target(u(rng), u(rng));
    EXPECT_LT((lens.undistort(target) - newton_undistort(lens, target)).norm(), 1e-7);
  }
}

TEST(Pose, RejectsNonOrthonormal) {
  Mat3 r = Mat3::Identity();
  r(0, 0) = 1.01;
  EXPECT_THROW(Pose(r, Vec3::Zero()), InvalidInput);
  EXPECT_THROW(Pose(-Mat3::Identity(), Vec3::Zero()), InvalidInput);
  EXPECT_NO_THROW(Pose::nearest(r, Vec3::Zero()));
}

TEST(Pose, LookAtPointsForward) {
  const Pose p = Pose::look_at({1, 2, 3}, {1, 5, 3});
  const Vec3 cam = p.to_camera({1, 5, 3});
  EXPECT_NEAR(cam.x(), 0, 1e-12);
  EXPECT_NEAR(cam.y(), 0, 1e-12);
  EXPECT_NEAR(cam.z(), 3, 1e-12);
  // World up (+z) appears as image up (-y).
  EXPECT_LT(p.to_camera({1, 5, 4}).y(), 0);
  const Pose inv = p.inverse();
  EXPECT_NEAR((inv.to_world(p.to_world({0.3, -0.2, 1})) - Vec3(0.3, -0.2, 1)).norm(), 0, 1e-12);
}

TEST(IntrinsicsForFov, Examples) {
  const CameraIntrinsics base = hd_camera();
  EXPECT_NEAR(intrinsics_for_fov(base, 90).fx, 640, 1e-9);
  const CameraIntrinsics same = intrinsics_for_fov(base, base.hfov_deg());
  EXPECT_NEAR(same.fx, base.fx, 1e-9);
  EXPECT_NEAR(same.fy, base.fy, 1e-9);

  const CameraIntrinsics hl = intrinsics_for_fov(base, kHoloLensHfovDeg);
  const CameraIntrinsics wide = intrinsics_for_fov(hl, kEnhancedHfovDeg);
  EXPECT_LT(wide.fx, hl.fx);
  EXPECT_EQ(wide.width, hl.width);
  EXPECT_EQ(wide.cx, hl.cx);
  EXPECT_NEAR(wide.fy / wide.fx, hl.fy / hl.fx, 1e-12);

  EXPECT_THROW(intrinsics_for_fov(base, 0), InvalidInput);
  EXPECT_THROW(intrinsics_for_fov(base, 180), InvalidInput);
  EXPECT_THROW(intrinsics_for_fov(base, -5), InvalidInput);
}

TEST(IntrinsicsForFov, StrictlyMonotone) {
  const CameraIntrinsics base = hd_camera();
  double prev = std::numeric_limits<double>::infinity();
  for (double fov = 1; fov < 180; fov += 0.5) {
    const double fx = intrinsics_for_fov(base, fov).fx;
    EXPECT_LT(fx, prev) << fov;
    prev = fx;
  }
}

TEST(IntrinsicsForFov, NarrowImageContainedInWide) {
  const CameraIntrinsics narrow = intrinsics_for_fov(hd_camera(), kHoloLensHfovDeg);
  const CameraIntrinsics wide = intrinsics_for_fov(narrow, kEnhancedHfovDeg);
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-3, 3), z(0.2, 8);
  int checked = 0;
  while (checked < 1000) {
    const Vec3 p(u(rng), u(rng), z(rng));
    const auto pn = project_point(p, narrow);
    if (!pn || pn->x() < 0 || pn->x() > narrow.width - 1 || pn->y() < 0 || pn->y() > narrow.height - 1) continue;
    const auto pw = project_point(p, wide);
    ASSERT_TRUE(pw);
    const double mapped_u = narrow.cx + (pn->x() - narrow.cx) * (wide.fx / narrow.fx);
    const double mapped_v = narrow.cy + (pn->y() - narrow.cy) * (wide.fy / narrow.fy);
    EXPECT_NEAR(pw->x(), mapped_u, 0.5);
    EXPECT_NEAR(pw->y(), mapped_v, 0.5);
    EXPECT_TRUE(pw->x() >= 0 && pw->x() <= wide.width - 1 && pw->y() >= 0 && pw->y() <= wide.height - 1);
    ++checked;
  }
}

TEST(UndistortImage, ZeroDistortionIsIdentity) {
  const CameraIntrinsics intr{100, 100, 32, 24, 64, 48};
  RgbImage img(64, 48, 3);
  std::mt19937 rng(1);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng() & 0xFF);
  EXPECT_EQ(undistort_image(img, intr, Distortion{}, Interpolation::kBilinear), img);
  EXPECT_EQ(undistort_image(img, intr, Distortion{}, Interpolation::kNearest), img);
}

TEST(UndistortImage, ConstantImageStaysConstantInside) {
  const CameraIntrinsics intr{100, 100, 32, 24, 64, 48};
  DepthImage depth(64, 48, 1, 2.5f);
  const DepthImage out = undistort_image(depth, intr, Distortion{0.2, 0.05, 0, 0.001, 0.001}, Interpolation::kNearest);
  int valid = 0;
  for (float v : out.pixels()) {
    EXPECT_TRUE(v == 0.0f || v == 2.5f);
    valid += v == 2.5f;
  }
  EXPECT_GT(valid, 64 * 48 / 2);
  EXPECT_EQ(out.at(32, 24), 2.5f);
}

TEST(UndistortImage, DimensionMismatch) {
  const CameraIntrinsics intr{100, 100, 32, 24, 64, 48};
  EXPECT_THROW(undistort_image(RgbImage(10, 10, 3), intr, Distortion{}, Interpolation::kBilinear), InvalidInput);
}

TEST(UndistortImage, BarrelGridBecomesStraight) {
  const CameraIntrinsics intr{250, 250, 160, 120, 320, 240};
  const Distortion lens{0.1, 0, 0, 0, 0};
  const double spacing = 40.0;  // ideal-pixel spacing of vertical lines
  // Captured (distorted) image: every pixel shows the analytic line profile of
  // the ideal location it images.
  GrayImage captured(intr.width, intr.height, 1);
  for (int y = 0; y < intr.height; ++y) {
    for (int x = 0; x < intr.width; ++x) {
      const Vec2 ideal = newton_undistort(lens, {(x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy});
      const double u = intr.cx + intr.fx * ideal.x();
      const double offset = std::remainder(u - intr.cx, spacing);
      captured.at(x, y) = 255.0 * std::exp(-offset * offset / (2 * 1.5 * 1.5));
    }
  }
  const GrayImage fixed = undistort_image(captured, intr, lens, Interpolation::kBilinear);
  // For each line, locate its center per row by an intensity centroid, then fit
  // u = a + b·v and measure the max residual.
  for (double line_u = intr.cx - 3 * spacing; line_u <= intr.cx + 3 * spacing; line_u += spacing) {
    std::vector<Vec2> centers;
    for (int y = 20; y < intr.height - 20; ++y) {
      double sw = 0, su = 0;
      for (int x = static_cast<int>(line_u) - 8; x <= static_cast<int>(line_u) + 8; ++x) {
        const double w = fixed.at(x, y);
        sw += w;
        su += w * x;
      }
      if (sw > 100) centers.emplace_back(su / sw, y);
    }
    ASSERT_GT(centers.size(), 100u);
    Eigen::MatrixXd a(centers.size(), 2);
    Eigen::VectorXd b(centers.size());
    for (std::size_t i = 0; i < centers.size(); ++i) {
      a(i, 0) = 1;
      a(i, 1) = centers[i].y();
      b(i) = centers[i].x();
    }
    const Eigen::Vector2d fit = a.colPivHouseholderQr().solve(b);
    const double worst = (a * fit - b).cwiseAbs().maxCoeff();
    EXPECT_LT(worst, 0.5) << "line at u=" << line_u;
  }
  // The captured image itself is visibly bent at the outer lines.
  double sw = 0, su = 0, sw2 = 0, su2 = 0;
  for (int x = 20; x < 100; ++x) {
    sw += captured.at(x, 120);
    su += captured.at(x, 120) * x;
    sw2 += captured.at(x, 25);
    su2 += captured.at(x, 25) * x;
  }
  EXPECT_GT(std::abs(su / sw - su2 / sw2), 0.5);
}
