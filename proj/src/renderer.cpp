#include "stabilens/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ply.hpp"

namespace stabilens {
namespace {

constexpr float kUntouched = std::numeric_limits<float>::infinity();

RenderResult blank(const RenderConfig& cfg) {
  RenderResult r{RgbImage(cfg.intr.width, cfg.intr.height, 3), DepthImage(cfg.intr.width, cfg.intr.height, 1, kUntouched)};
  auto px = r.color.pixels();
  for (std::size_t i = 0; i < px.size(); i += 3) {
    px[i] = cfg.background[0];
    px[i + 1] = cfg.background[1];
    px[i + 2] = cfg.background[2];
  }
  return r;
}

std::uint8_t to_byte(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

struct ClipVertex {
  Vec3 p;  // camera frame
  Vec3 c;
};

// Sutherland-Hodgman against z >= near.
int clip_near(const std::array<ClipVertex, 3>& in, double near, std::array<ClipVertex, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const ClipVertex& a = in[i];
    const ClipVertex& b = in[(i + 1) % 3];
    const bool a_in = a.p.z() >= near, b_in = b.p.z() >= near;
    if (a_in) out[n++] = a;
    if (a_in != b_in) {
      const double t = (near - a.p.z()) / (b.p.z() - a.p.z());
      out[n++] = {a.p + t * (b.p - a.p), a.c + t * (b.c - a.c)};
    }
  }
  return n;
}

void raster_triangle(const std::array<ClipVertex, 3>& v, const RenderConfig& cfg, RenderResult& out) {
  const CameraIntrinsics& k = cfg.intr;
  double su[3], sv[3], inv_z[3];
  for (int i = 0; i < 3; ++i) {
    inv_z[i] = 1.0 / v[i].p.z();
    su[i] = k.cx + k.fx * v[i].p.x() * inv_z[i];
    sv[i] = k.cy + k.fy * v[i].p.y() * inv_z[i];
  }
  const double area = (su[1] - su[0]) * (sv[2] - sv[0]) - (sv[1] - sv[0]) * (su[2] - su[0]);
  if (!(std::abs(area) > 1e-12)) return;
  const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({su[0], su[1], su[2]}) - 1e-7)));
  const int x1 = std::min(k.width - 1, static_cast<int>(std::floor(std::max({su[0], su[1], su[2]}) + 1e-7)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({sv[0], sv[1], sv[2]}) - 1e-7)));
  const int y1 = std::min(k.height - 1, static_cast<int>(std::floor(std::max({sv[0], sv[1], sv[2]}) + 1e-7)));
  if (x0 > x1 || y0 > y1) return;
  const double inv_area = 1.0 / area;
  const double eps = -1e-9;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      // Barycentric weights of the pixel center.
      const double b0 = ((su[1] - x) * (sv[2] - y) - (sv[1] - y) * (su[2] - x)) * inv_area;
      const double b1 = ((su[2] - x) * (sv[0] - y) - (sv[2] - y) * (su[0] - x)) * inv_area;
      const double b2 = 1.0 - b0 - b1;
      if (b0 < eps || b1 < eps || b2 < eps) continue;
      const double w = b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2];
      const double z = 1.0 / w;
      if (z < cfg.near || z > cfg.far) continue;
      float& zb = out.depth.at(x, y);
      if (!(z < zb)) continue;
      zb = static_cast<float>(z);
      const Vec3 c = (b0 * inv_z[0] * v[0].c + b1 * inv_z[1] * v[1].c + b2 * inv_z[2] * v[2].c) * z;
      for (int ch = 0; ch < 3; ++ch) out.color.at(x, y, ch) = to_byte(c[ch]);
    }
  }
}

}  // namespace

void RenderConfig::validate() const {
  intr.validate();
  if (!(splat_radius >= 0)) throw InvalidInput("render: splat radius must be non-negative");
  if (!(near > 0 && far > near)) throw InvalidInput("render: need 0 < near < far");
}

std::size_t RenderResult::covered_pixels() const {
  std::size_t n = 0;
  for (float z : depth.pixels()) n += std::isfinite(z);
  return n;
}

RenderResult render_pointcloud(const PointCloud& pc, const Pose& pose, const RenderConfig& cfg) {
  cfg.validate();
  RenderResult out = blank(cfg);
  const CameraIntrinsics& k = cfg.intr;
  const double r = cfg.splat_radius;
  const double r2 = r * r;
  const Mat3 rt = pose.rotation().transpose();
  const Vec3 t = pose.translation();
  for (std::size_t i = 0; i < pc.size(); ++i) {
    const Vec3 p = rt * (pc.positions[i] - t);
    const double z = p.z();
    if (z < cfg.near || z > cfg.far) continue;
    const double u = k.cx + k.fx * p.x() / z;
    const double v = k.cy + k.fy * p.y() / z;
    if (u < -r - 1 || v < -r - 1 || u > k.width + r || v > k.height + r) continue;
    const Vec3 c = pc.has_colors() ? pc.colors[i] : Vec3::Ones();
    const std::array<std::uint8_t, 3> rgb{to_byte(c[0]), to_byte(c[1]), to_byte(c[2])};
    const auto zf = static_cast<float>(z);
    auto paint = [&](int x, int y) {
      float& zb = out.depth.at(x, y);
      if (!(zf < zb)) return;
      zb = zf;
      for (int ch = 0; ch < 3; ++ch) out.color.at(x, y, ch) = rgb[ch];
    };
    if (r < 0.5) {
      const int x = static_cast<int>(std::lround(u)), y = static_cast<int>(std::lround(v));
      if (out.color.contains(x, y)) paint(x, y);
      continue;
    }
    const int x0 = std::max(0, static_cast<int>(std::ceil(u - r)));
    const int x1 = std::min(k.width - 1, static_cast<int>(std::floor(u + r)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(v - r)));
    const int y1 = std::min(k.height - 1, static_cast<int>(std::floor(v + r)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if ((x - u) * (x - u) + (y - v) * (y - v) <= r2) paint(x, y);
  }
  return out;
}

RenderResult render_mesh(const TriangleMesh& mesh, const Pose& pose, const RenderConfig& cfg) {
  cfg.validate();
  RenderResult out = blank(cfg);
  const Mat3 rt = pose.rotation().transpose();
  const Vec3 t = pose.translation();
  std::vector<Vec3> cam(mesh.vertices.size());
  for (std::size_t i = 0; i < cam.size(); ++i) cam[i] = rt * (mesh.vertices[i] - t);
  const Vec3 white = Vec3::Ones();
  std::array<ClipVertex, 4> poly;
  for (const auto& tri : mesh.triangles) {
    std::array<ClipVertex, 3> v;
    bool any_front = false;
    for (int i = 0; i < 3; ++i) {
      v[i] = {cam[tri[i]], mesh.has_colors() ? mesh.vertex_colors[tri[i]] : white};
      any_front |= v[i].p.z() >= cfg.near;
    }
    if (!any_front) continue;
    const int n = clip_near(v, cfg.near, poly);
    for (int i = 1; i + 1 < n; ++i) raster_triangle({poly[0], poly[i], poly[i + 1]}, cfg, out);
  }
  return out;
}

RenderResult render_scene(const Scene& scene, const Pose& pose, const RenderConfig& cfg) {
  return std::visit(
      [&](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, PointCloud>)
          return render_pointcloud(s, pose, cfg);
        else
          return render_mesh(s, pose, cfg);
      },
      scene);
}

Scene load_scene(const std::filesystem::path& ply_path) {
  TriangleMesh mesh = read_mesh_ply(ply_path);
  if (!mesh.triangles.empty()) return mesh;
  PointCloud pc;
  pc.positions = std::move(mesh.vertices);
  pc.colors = std::move(mesh.vertex_colors);
  if (pc.colors.empty()) pc.colors.assign(pc.positions.size(), Vec3::Ones());
  return pc;
}

}  // namespace stabilens
