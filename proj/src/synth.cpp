#include "stabilens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "stabilens/parallel.hpp"
#include "stabilens/renderer.hpp"

namespace stabilens {
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

// Low-frequency color field so vertex interpolation represents it faithfully.
Vec3 texture(const Vec3& p, int surface) {
  static const Vec3 base[] = {{0.55, 0.45, 0.35}, {0.35, 0.5, 0.6},  {0.6, 0.55, 0.4}, {0.45, 0.6, 0.4},
                              {0.6, 0.4, 0.45},   {0.5, 0.5, 0.55},  {0.7, 0.3, 0.2},  {0.2, 0.4, 0.7}};
  const Vec3& b = base[surface % 8];
  const double s1 = std::sin(kTwoPi * (0.9 * p.x() + 0.4 * p.y() + 0.3 * p.z()));
  const double s2 = std::sin(kTwoPi * (0.3 * p.x() - 1.1 * p.y() + 0.8 * p.z()) + 1.0);
  const double s3 = std::cos(kTwoPi * (1.7 * p.z() + 0.5 * p.x()));
  Vec3 c(b.x() + 0.2 * s1 + 0.05 * s3, b.y() + 0.15 * s2 + 0.05 * s1, b.z() + 0.15 * s3 - 0.05 * s2);
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

// Grid-tessellated rectangle origin + u*a + v*b, u,v in [0,1].
void add_quad(TriangleMesh& m, const Vec3& origin, const Vec3& a, const Vec3& b, double step, int surface) {
  const int nu = std::max(1, static_cast<int>(std::ceil(a.norm() / step)));
  const int nv = std::max(1, static_cast<int>(std::ceil(b.norm() / step)));
  const auto base = static_cast<std::uint32_t>(m.vertices.size());
  for (int j = 0; j <= nv; ++j)
    for (int i = 0; i <= nu; ++i) {
      const Vec3 p = origin + a * (static_cast<double>(i) / nu) + b * (static_cast<double>(j) / nv);
      m.vertices.push_back(p);
      m.vertex_colors.push_back(texture(p, surface));
    }
  auto idx = [&](int i, int j) { return base + static_cast<std::uint32_t>(j * (nu + 1) + i); };
  for (int j = 0; j < nv; ++j)
    for (int i = 0; i < nu; ++i) {
      m.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      m.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
    }
}

void add_box(TriangleMesh& m, const Vec3& lo, const Vec3& hi, double step, int surface, bool with_bottom) {
  const Vec3 d = hi - lo;
  const Vec3 ex(d.x(), 0, 0), ey(0, d.y(), 0), ez(0, 0, d.z());
  add_quad(m, lo, ey, ez, step, surface);                     // x = lo
  add_quad(m, lo + ex, ey, ez, step, surface);                // x = hi
  add_quad(m, lo, ex, ez, step, surface + 1);                 // y = lo
  add_quad(m, lo + ey, ex, ez, step, surface + 1);            // y = hi
  if (with_bottom) add_quad(m, lo, ex, ey, step, surface + 2);  // z = lo
  add_quad(m, lo + ez, ex, ey, step, surface + 2);            // z = hi
}

}  // namespace

TriangleMesh synthetic_room_mesh(const SynthOptions& o) {
  TriangleMesh m;
  const Vec3 s = o.room_size;
  add_quad(m, {0, 0, 0}, {0, s.y(), 0}, {0, 0, s.z()}, o.tessellation, 0);
  add_quad(m, {s.x(), 0, 0}, {0, s.y(), 0}, {0, 0, s.z()}, o.tessellation, 1);
  add_quad(m, {0, 0, 0}, {s.x(), 0, 0}, {0, 0, s.z()}, o.tessellation, 2);
  add_quad(m, {0, s.y(), 0}, {s.x(), 0, 0}, {0, 0, s.z()}, o.tessellation, 3);
  add_quad(m, {0, 0, 0}, {s.x(), 0, 0}, {0, s.y(), 0}, o.tessellation, 4);
  add_quad(m, {0, 0, s.z()}, {s.x(), 0, 0}, {0, s.y(), 0}, o.tessellation, 5);
  if (!o.furniture) return m;
  const Vec3 unit = s.cwiseQuotient(Vec3(4.0, 3.0, 2.5));
  add_box(m, Vec3(0.3, 0.3, 0).cwiseProduct(unit), Vec3(1.1, 0.9, 0.75).cwiseProduct(unit), o.tessellation, 6, false);
  add_box(m, Vec3(3.0, 2.0, 0).cwiseProduct(unit), Vec3(3.6, 2.7, 1.2).cwiseProduct(unit), o.tessellation, 1, false);
  return m;
}

Pose synthetic_trajectory(double t, const SynthOptions& o) {
  const Vec3 center = 0.5 * o.room_size;
  const double phase = t / o.duration_s;
  const double yaw = kTwoPi * 2.0 * phase;
  const double pitch = 0.30 * std::sin(kTwoPi * 7.0 * phase);
  const Vec3 eye(center.x() + 0.35 * std::cos(kTwoPi * phase), center.y() + 0.25 * std::sin(kTwoPi * phase),
                 1.5 + 0.1 * std::sin(kTwoPi * 3.0 * phase));
  const Vec3 dir(std::cos(yaw) * std::cos(pitch), std::sin(yaw) * std::cos(pitch), std::sin(pitch));
  return Pose::look_at(eye, eye + dir);
}

SynthSummary generate_synthetic_room(const fs::path& out, const SynthOptions& o) {
  if (!(o.duration_s > 0 && o.rgb_hz > 0 && o.depth_hz > 0 && o.tessellation > 0))
    throw InvalidInput("synth: rates, duration and tessellation must be positive");
  if (o.test_poses < 0) throw InvalidInput("synth: negative test pose count");
  std::error_code ec;
  for (const char* sub : {"rgb", "depth", "test/rgb"}) {
    fs::create_directories(out / sub, ec);
    if (ec) throw IoError("cannot create " + (out / sub).string() + ": " + ec.message());
  }
  const TriangleMesh room = synthetic_room_mesh(o);
  write_mesh_ply(out / "room_mesh.ply", room);

  CaptureDataset ds;
  ds.rgb_calib.intr = centered_intrinsics(o.rgb_width, o.rgb_height, o.rgb_hfov_deg);
  ds.depth_calib.intr = centered_intrinsics(o.depth_width, o.depth_height, o.depth_hfov_deg);
  auto frames = [&](double hz, FrameKind kind) {
    std::vector<FrameRecord> recs;
    const auto n = static_cast<std::size_t>(std::floor(o.duration_s * hz));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ts = static_cast<std::int64_t>(std::llround(1e6 * static_cast<double>(i) / hz));
      recs.push_back({ts, kind, frame_image_path(kind, ts), synthetic_trajectory(ts * 1e-6, o)});
    }
    return recs;
  };
  ds.rgb_frames = frames(o.rgb_hz, FrameKind::kRgb);
  ds.depth_frames = frames(o.depth_hz, FrameKind::kDepth);

  RenderConfig rgb_cfg;
  rgb_cfg.intr = ds.rgb_calib.intr;
  RenderConfig depth_cfg;
  depth_cfg.intr = ds.depth_calib.intr;
  parallel_for(ds.rgb_frames.size(), [&](std::size_t i) {
    write_png_rgb(out / ds.rgb_frames[i].image_path, render_mesh(room, ds.rgb_frames[i].pose, rgb_cfg).color);
  });
  parallel_for(ds.depth_frames.size(), [&](std::size_t i) {
    DepthImage d = render_mesh(room, ds.depth_frames[i].pose, depth_cfg).depth;
    for (float& z : d.pixels())
      if (!std::isfinite(z)) z = 0;
    write_png_depth_mm(out / ds.depth_frames[i].image_path, d);
  });
  save_dataset_metadata(ds, out);

  // Held-out poses fall strictly between capture frames.
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> when(0.05 * o.duration_s, 0.95 * o.duration_s);
  std::vector<FrameRecord> test;
  std::vector<std::int64_t> stamps;
  const auto rgb_period_us = static_cast<std::int64_t>(std::llround(1e6 / o.rgb_hz));
  while (stamps.size() < static_cast<std::size_t>(o.test_poses)) {
    std::int64_t ts = static_cast<std::int64_t>(when(rng) * 1e6);
    ts = ts - ts % rgb_period_us + rgb_period_us / 2;
    if (std::find(stamps.begin(), stamps.end(), ts) == stamps.end()) stamps.push_back(ts);
  }
  std::sort(stamps.begin(), stamps.end());
  for (std::int64_t ts : stamps)
    test.push_back({ts, FrameKind::kRgb, fs::path("test/rgb") / (std::to_string(ts) + ".png"),
                    synthetic_trajectory(ts * 1e-6, o)});
  parallel_for(test.size(), [&](std::size_t i) {
    write_png_rgb(out / test[i].image_path, render_mesh(room, test[i].pose, rgb_cfg).color);
  });
  write_pose_csv(out / "test" / "poses.csv", test);
  return {ds.rgb_frames.size(), ds.depth_frames.size(), test.size()};
}

}  // namespace stabilens
