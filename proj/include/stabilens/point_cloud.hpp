#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "stabilens/camera.hpp"
#include "stabilens/dataset.hpp"
#include "stabilens/image.hpp"

namespace stabilens {

/// Parallel arrays of positions and optional per-point colors (RGB in [0,1]) and
/// unit normals. An optional array is either empty or as long as positions.
struct PointCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<Vec3> normals;

  std::size_t size() const noexcept { return positions.size(); }
  bool empty() const noexcept { return positions.empty(); }
  bool has_colors() const noexcept { return !colors.empty(); }
  bool has_normals() const noexcept { return !normals.empty(); }

  /// Throws InvalidInput on length mismatch, non-finite positions or non-unit normals.
  void validate() const;
  /// Points at the given indices, in that order.
  PointCloud select(std::span<const std::uint32_t> indices) const;
  void append(const PointCloud& other);
  void reserve(std::size_t n);
};

struct DepthRange {
  double z_min = 0.3;
  double z_max = 10.0;
};

/// One camera-frame point per valid pixel whose depth lies in [z_min, z_max].
PointCloud build_frame_cloud(const DepthImage& depth, const CameraIntrinsics& intr, const Distortion& dist,
                             const DepthRange& range = {});

/// Indices of points with at least min_neighbors other points within radius.
std::vector<std::uint32_t> radius_outlier_indices(const PointCloud& pc, double radius, int min_neighbors);
PointCloud radius_outlier_filter(const PointCloud& pc, double radius, int min_neighbors);

/// Mean distance of each point to its k nearest other points.
std::vector<double> mean_knn_distances(const PointCloud& pc, int k);
/// Indices of points whose mean k-NN distance is at most mean + alpha·stddev.
std::vector<std::uint32_t> statistical_outlier_indices(const PointCloud& pc, int k, double alpha);
PointCloud statistical_outlier_filter(const PointCloud& pc, int k, double alpha);

/// Moves camera-frame points into the world, projects them into the RGB
/// camera and keeps those landing at least edge_margin·min(width, height)
/// pixels inside the image, with bilinearly sampled colors.
PointCloud colorize_frame_cloud(const PointCloud& pc_cam, const Pose& depth_pose, const Pose& rgb_pose,
                                const RgbImage& rgb, const CameraIntrinsics& rgb_intr, const Distortion& rgb_dist,
                                double edge_margin);

/// Voxel of every input point, and the centroid cloud sorted by voxel index.
struct VoxelGrid {
  double voxel_size = 0;
  std::vector<std::array<std::int64_t, 3>> voxel_of_point;
  std::vector<std::array<std::int64_t, 3>> occupied;  // sorted, one entry per output point
};

PointCloud voxel_downsample(const PointCloud& pc, double voxel_size, VoxelGrid* grid = nullptr);

/// Appends incoming points that have no scene point closer than min_separation.
/// Incoming points are not compared with each other; scene points are untouched.
PointCloud dedup_merge(const PointCloud& scene, const PointCloud& incoming, double min_separation);

struct ReconstructionConfig {
  DepthRange range{};
  double radius_filter_radius = 0.05;
  int radius_filter_min_neighbors = 5;
  int stat_filter_k = 20;
  double stat_filter_alpha = 2.0;
  double voxel_size = 0.01;
  double min_separation = 0.0;  // 0 = voxel_size
  double edge_margin = 0.1;
  std::int64_t max_association_gap_us = kDefaultMaxAssociationGapUs;
  bool final_statistical_filter = true;
};

struct SceneBuild {
  PointCloud cloud;
  std::size_t frames_merged = 0;
  std::vector<std::string> warnings;  // one per skipped frame
};

/// Full per-frame reconstruction: back-project, filter, colorize, downsample,
/// then stitch frames in timestamp order and run a final statistical filter.
SceneBuild build_scene_cloud(const CaptureDataset& dataset, const ReconstructionConfig& config = {});

/// Binary little-endian PLY: x y z float32, red green blue uint8, optional nx ny nz float32.
void write_point_cloud_ply(const std::filesystem::path& path, const PointCloud& pc);
PointCloud read_point_cloud_ply(const std::filesystem::path& path);

}  // namespace stabilens
