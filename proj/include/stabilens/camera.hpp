#pragma once

#include <optional>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "stabilens/error.hpp"
#include "stabilens/image.hpp"

namespace stabilens {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole intrinsics in pixels. Pixel (i, j) has its center at u = i, v = j.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  /// Throws InvalidInput unless fx, fy > 0 and the principal point lies in the image.
  void validate() const;
  double hfov_deg() const;
  double vfov_deg() const;

  friend bool operator==(const CameraIntrinsics&, const CameraIntrinsics&) = default;
};

/// Brown-Conrady lens model (OpenCV coefficient order k1 k2 p1 p2 k3).
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool is_zero() const noexcept { return k1 == 0 && k2 == 0 && k3 == 0 && p1 == 0 && p2 == 0; }
  void validate() const;

  /// Maps an ideal normalized point to its distorted normalized location.
  Vec2 distort(const Vec2& p) const noexcept;
  /// Inverse of distort() by fixed-point iteration (at most 20 steps, 1e-8 tolerance).
  Vec2 undistort(const Vec2& p) const noexcept;

  friend bool operator==(const Distortion&, const Distortion&) = default;
};

/// Rigid camera-to-world transform. Camera frame is +X right, +Y down, +Z forward.
class Pose {
 public:
  static constexpr double kOrthonormalTolerance = 1e-6;

  Pose() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  /// Throws InvalidInput when the rotation is not in SO(3) within 1e-6.
  Pose(const Mat3& rotation, const Vec3& translation);

  /// Projects an approximately orthonormal matrix onto SO(3) before constructing.
  static Pose nearest(const Mat3& rotation, const Vec3& translation);
  static Pose look_at(const Vec3& eye, const Vec3& target, const Vec3& up = Vec3(0, 0, 1));

  const Mat3& rotation() const noexcept { return rotation_; }
  const Vec3& translation() const noexcept { return translation_; }
  const Vec3& center() const noexcept { return translation_; }

  Vec3 to_world(const Vec3& p_cam) const { return rotation_ * p_cam + translation_; }
  Vec3 to_camera(const Vec3& p_world) const { return rotation_.transpose() * (p_world - translation_); }
  Pose inverse() const;
  Pose operator*(const Pose& rhs) const;

  /// Max-abs deviation of RᵀR from I.
  static double orthonormality_error(const Mat3& r);

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Pixel location of a camera-frame point, or nullopt when z <= 1e-6.
std::optional<Vec2> project_point(const Vec3& p_cam, const CameraIntrinsics& intr, const Distortion& dist = {});

/// Lifts a (distorted) pixel with metric depth to a camera-frame point.
Vec3 back_project_pixel(double u, double v, double depth, const CameraIntrinsics& intr,
                        const Distortion& dist = {});

enum class Interpolation { kNearest, kBilinear };

/// Resamples an image into the distortion-free camera. Samples falling outside
/// the source produce the zero value of T.
template <typename T>
Image<T> undistort_image(const Image<T>& img, const CameraIntrinsics& intr, const Distortion& dist,
                         Interpolation interp);

/// Same principal point and size; focal lengths rescaled so the horizontal FoV
/// becomes target_hfov_deg.
CameraIntrinsics intrinsics_for_fov(const CameraIntrinsics& base, double target_hfov_deg);

/// Square pixels, principal point at the image center.
CameraIntrinsics centered_intrinsics(int width, int height, double hfov_deg);

/// Horizontal FoV of the HoloLens 2 RGB camera.
inline constexpr double kHoloLensHfovDeg = 64.69;
/// Canonical widened FoV used for enhanced rendering.
inline constexpr double kEnhancedHfovDeg = 100.0;

}  // namespace stabilens
