#pragma once

#include <array>
#include <cstdint>
#include <variant>

#include "stabilens/camera.hpp"
#include "stabilens/image.hpp"
#include "stabilens/meshing.hpp"
#include "stabilens/point_cloud.hpp"

namespace stabilens {

struct RenderConfig {
  CameraIntrinsics intr;
  double splat_radius = 2.0;  // pixels
  std::array<std::uint8_t, 3> background{0, 0, 0};
  double near = 0.05;
  double far = 100.0;

  void validate() const;
};

struct RenderResult {
  RgbImage color;
  /// Camera-frame z of the visible surface; +infinity where nothing was drawn.
  DepthImage depth;

  std::size_t covered_pixels() const;
};

/// Z-buffered splatting: every point within [near, far] paints the pixels whose
/// centers lie within splat_radius of its projection (radius below 0.5 paints
/// the single nearest pixel). Colors are written unshaded.
RenderResult render_pointcloud(const PointCloud& pc, const Pose& pose, const RenderConfig& cfg);

/// Z-buffered triangle rasterization with perspective-correct color and depth,
/// near-plane clipping and no backface culling.
RenderResult render_mesh(const TriangleMesh& mesh, const Pose& pose, const RenderConfig& cfg);

using Scene = std::variant<PointCloud, TriangleMesh>;

RenderResult render_scene(const Scene& scene, const Pose& pose, const RenderConfig& cfg);

/// Loads a PLY with faces as a mesh and one without as a point cloud.
Scene load_scene(const std::filesystem::path& ply_path);

}  // namespace stabilens
