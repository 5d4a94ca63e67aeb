#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "stabilens/point_cloud.hpp"

namespace stabilens {

using Triangle = std::array<std::uint32_t, 3>;

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> vertex_colors;   // empty or one per vertex, RGB in [0,1]
  std::vector<Triangle> triangles;
  std::vector<double> vertex_density;  // empty or one per vertex

  std::size_t vertex_count() const noexcept { return vertices.size(); }
  std::size_t triangle_count() const noexcept { return triangles.size(); }
  bool has_colors() const noexcept { return !vertex_colors.empty(); }

  /// Throws InvalidInput on out-of-range or repeated indices, length mismatch
  /// or non-finite vertices.
  void validate() const;
};

struct AxisAlignedBox {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool valid() const { return (min.array() <= max.array()).all(); }
  bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }

  static AxisAlignedBox bounding(std::span<const Vec3> points);
  /// Pushes every face outward by fraction·extent along its axis.
  AxisAlignedBox expanded(double fraction) const;
};

/// Cell of the adaptive octree used by the Poisson solver. Children are either
/// all present (indices into the node array) or all -1.
struct OctreeNode {
  Vec3 center;
  double half_width = 0;
  int depth = 0;
  std::array<std::int32_t, 8> children{-1, -1, -1, -1, -1, -1, -1, -1};

  bool is_leaf() const noexcept { return children[0] < 0; }
};

/// Adaptive octree: complete down to full_depth, refined below that only near
/// the samples (a ring of `dilation` cells around every occupied cell).
class Octree {
 public:
  Octree(std::span<const Vec3> samples, const Vec3& center, double half_width, int max_depth, int full_depth,
         int dilation = 2);

  const std::vector<OctreeNode>& nodes() const noexcept { return nodes_; }
  const OctreeNode& root() const { return nodes_.front(); }
  int max_depth() const noexcept { return max_depth_; }
  Vec3 origin() const { return root().center - Vec3::Constant(root().half_width); }
  double width() const { return 2.0 * root().half_width; }
  /// Edge length of cells at the given depth.
  double cell_size(int depth) const { return width() / static_cast<double>(1 << depth); }

  /// Integer coordinates of the cells present at a depth.
  const std::vector<std::array<std::int32_t, 3>>& cells_at(int depth) const { return cells_[depth]; }

 private:
  std::int32_t add_node(const Vec3& center, double half_width, int depth);

  int max_depth_;
  std::vector<OctreeNode> nodes_;
  std::vector<std::vector<std::array<std::int32_t, 3>>> cells_;
};

/// Unit normal per point from the smallest-eigenvalue eigenvector of the
/// covariance of the point and its k nearest neighbours. Sign is arbitrary.
PointCloud estimate_normals(const PointCloud& pc, int k);

struct OrientedNormals {
  PointCloud cloud;
  std::size_t components = 0;
};

/// Makes normal signs consistent by propagating along a minimum spanning tree
/// of the k-NN graph (edge weight 1 - |ni·nj|), seeded at the highest point of
/// each connected component with its normal turned upward. With camera centers,
/// each component is finally flipped so most normals face their nearest camera.
OrientedNormals orient_normals(const PointCloud& pc, std::span<const Vec3> camera_centers = {}, int k = 10);

struct PoissonOptions {
  int max_depth = 8;
  /// Depth up to which the octree is complete.
  int full_depth = 5;
  /// Bounding cube edge relative to the largest sample extent.
  double scale = 1.25;
  double cg_tolerance = 1e-7;
  int cg_max_iterations = 1000;
};

struct PoissonStats {
  std::vector<int> iterations_per_depth;
  std::vector<double> residual_per_depth;
  double iso_value = 0;
};

/// Poisson surface reconstruction. Normals must be oriented outward. The
/// indicator is solved level by level on the adaptive octree with conjugate
/// gradients and contoured at the mean indicator value over the samples.
/// Throws InvalidInput on fewer than 4 samples, missing normals or a depth
/// outside [4, 10]; SolverError when a level ends with a relative residual
/// above 1e-3.
TriangleMesh poisson_reconstruct(const PointCloud& pc, int max_depth, PoissonStats* stats = nullptr);
TriangleMesh poisson_reconstruct(const PointCloud& pc, const PoissonOptions& opts, PoissonStats* stats = nullptr);

/// Removes vertices whose density is below the given quantile (linear
/// interpolation between order statistics) or that fall outside bbox, drops
/// their triangles and reindexes the remaining vertices compactly.
TriangleMesh trim_mesh(const TriangleMesh& mesh, double density_quantile, const AxisAlignedBox& bbox);

/// Binary little-endian PLY: x y z float32, red green blue uint8, face list uint8 + uint32.
void write_mesh_ply(const std::filesystem::path& path, const TriangleMesh& mesh);
TriangleMesh read_mesh_ply(const std::filesystem::path& path);

}  // namespace stabilens
