#include "stabilens/camera.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/SVD>

namespace stabilens {
namespace {

constexpr double kBehindCameraZ = 1e-6;
constexpr int kUndistortIterations = 20;
constexpr double kUndistortTolerance = 1e-8;

double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0) || !std::isfinite(fx) || !std::isfinite(fy))
    throw InvalidInput("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidInput("intrinsics: image size must be positive");
  if (!(cx >= 0 && cx < width && cy >= 0 && cy < height))
    throw InvalidInput("intrinsics: principal point outside the image");
}

double CameraIntrinsics::hfov_deg() const { return rad2deg(2.0 * std::atan(width / 2.0 / fx)); }
double CameraIntrinsics::vfov_deg() const { return rad2deg(2.0 * std::atan(height / 2.0 / fy)); }

void Distortion::validate() const {
  for (double c : {k1, k2, k3, p1, p2})
    if (!std::isfinite(c)) throw InvalidInput("distortion: coefficients must be finite");
}

Vec2 Distortion::distort(const Vec2& p) const noexcept {
  const double x = p.x(), y = p.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
  return {x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x),
          y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y};
}

Vec2 Distortion::undistort(const Vec2& p) const noexcept {
  if (is_zero()) return p;
  Vec2 q = p;
  for (int it = 0; it < kUndistortIterations; ++it) {
    const double x = q.x(), y = q.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    const double dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
    const double dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
    const Vec2 next((p.x() - dx) / radial, (p.y() - dy) / radial);
    const double step = (next - q).norm();
    q = next;
    if (step < kUndistortTolerance) break;
  }
  return q;
}

Pose::Pose(const Mat3& rotation, const Vec3& translation) : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) throw InvalidInput("pose: non-finite entries");
  if (orthonormality_error(rotation) > kOrthonormalTolerance)
    throw InvalidInput("pose: rotation is not orthonormal");
  if (std::abs(rotation.determinant() - 1.0) > kOrthonormalTolerance)
    throw InvalidInput("pose: rotation determinant is not +1");
}

Pose Pose::nearest(const Mat3& rotation, const Vec3& translation) {
  Eigen::JacobiSVD<Mat3> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0) {
    Mat3 u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return Pose(r, translation);
}

Pose Pose::look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.unitOrthogonal();
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose(r, eye);
}

Pose Pose::inverse() const {
  const Mat3 rt = rotation_.transpose();
  return Pose(rt, -rt * translation_);
}

Pose Pose::operator*(const Pose& rhs) const {
  return Pose::nearest(rotation_ * rhs.rotation_, rotation_ * rhs.translation_ + translation_);
}

double Pose::orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

std::optional<Vec2> project_point(const Vec3& p_cam, const CameraIntrinsics& intr, const Distortion& dist) {
  if (!(p_cam.z() > kBehindCameraZ)) return std::nullopt;
  const Vec2 normalized(p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z());
  const Vec2 d = dist.is_zero() ? normalized : dist.distort(normalized);
  return Vec2(intr.cx + intr.fx * d.x(), intr.cy + intr.fy * d.y());
}

Vec3 back_project_pixel(double u, double v, double depth, const CameraIntrinsics& intr, const Distortion& dist) {
  if (!(depth > 0) || !std::isfinite(depth)) throw InvalidInput("back_project_pixel: depth must be positive");
  const Vec2 ideal = dist.undistort(Vec2((u - intr.cx) / intr.fx, (v - intr.cy) / intr.fy));
  return {ideal.x() * depth, ideal.y() * depth, depth};
}

template <typename T>
Image<T> undistort_image(const Image<T>& img, const CameraIntrinsics& intr, const Distortion& dist,
                         Interpolation interp) {
  intr.validate();
  if (img.width() != intr.width || img.height() != intr.height)
    throw InvalidInput("undistort_image: image is " + std::to_string(img.width()) + "x" +
                       std::to_string(img.height()) + " but calibration is " + std::to_string(intr.width) + "x" +
                       std::to_string(intr.height));
  if (dist.is_zero()) return img;
  const int w = img.width(), h = img.height(), ch = img.channels();
  Image<T> out(w, h, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Vec2 d = dist.distort(Vec2((x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy));
      const double su = intr.cx + intr.fx * d.x();
      const double sv = intr.cy + intr.fy * d.y();
      if (interp == Interpolation::kNearest) {
        const int ix = static_cast<int>(std::lround(su));
        const int iy = static_cast<int>(std::lround(sv));
        if (!img.contains(ix, iy) || !std::isfinite(su) || !std::isfinite(sv)) continue;
        for (int c = 0; c < ch; ++c) out.at(x, y, c) = img.at(ix, iy, c);
        continue;
      }
      if (!(su >= 0 && sv >= 0 && su <= w - 1 && sv <= h - 1)) continue;
      const int x0 = static_cast<int>(std::floor(su));
      const int y0 = static_cast<int>(std::floor(sv));
      const int x1 = std::min(x0 + 1, w - 1);
      const int y1 = std::min(y0 + 1, h - 1);
      const double fx = su - x0, fy = sv - y0;
      for (int c = 0; c < ch; ++c) {
        const double top = (1 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
        const double bottom = (1 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
        const double value = (1 - fy) * top + fy * bottom;
        if constexpr (std::is_integral_v<T>)
          out.at(x, y, c) = static_cast<T>(std::lround(value));
        else
          out.at(x, y, c) = static_cast<T>(value);
      }
    }
  }
  return out;
}

template RgbImage undistort_image(const RgbImage&, const CameraIntrinsics&, const Distortion&, Interpolation);
template DepthImage undistort_image(const DepthImage&, const CameraIntrinsics&, const Distortion&, Interpolation);
template GrayImage undistort_image(const GrayImage&, const CameraIntrinsics&, const Distortion&, Interpolation);

CameraIntrinsics intrinsics_for_fov(const CameraIntrinsics& base, double target_hfov_deg) {
  if (!(target_hfov_deg > 0.0 && target_hfov_deg < 180.0))
    throw InvalidInput("intrinsics_for_fov: FoV must be in (0, 180) degrees");
  base.validate();
  CameraIntrinsics out = base;
  out.fx = (base.width / 2.0) / std::tan(deg2rad(target_hfov_deg) / 2.0);
  out.fy = base.fy * (out.fx / base.fx);
  return out;
}

CameraIntrinsics centered_intrinsics(int width, int height, double hfov_deg) {
  if (width < 1 || height < 1) throw InvalidInput("centered_intrinsics: image size must be positive");
  if (!(hfov_deg > 0.0 && hfov_deg < 180.0)) throw InvalidInput("centered_intrinsics: FoV must be in (0, 180) degrees");
  const double f = (width / 2.0) / std::tan(deg2rad(hfov_deg) / 2.0);
  return {f, f, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
}

}  // namespace stabilens
