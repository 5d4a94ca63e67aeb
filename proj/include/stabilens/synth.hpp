#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stabilens/camera.hpp"
#include "stabilens/dataset.hpp"
#include "stabilens/meshing.hpp"

namespace stabilens {

/// Parameters of the synthetic textured-room capture.
struct SynthOptions {
  Vec3 room_size{4.0, 3.0, 2.5};  // x, y, z (floor at z = 0)
  double tessellation = 0.05;     // mesh grid step, meters
  bool furniture = true;          // two boxes standing on the floor
  double duration_s = 16.0;
  double rgb_hz = 25.0;
  double depth_hz = 5.0;
  int rgb_width = 640;
  int rgb_height = 360;
  double rgb_hfov_deg = kHoloLensHfovDeg;
  int depth_width = 320;
  int depth_height = 288;
  double depth_hfov_deg = 75.0;
  int test_poses = 12;
  std::uint64_t seed = 7;
};

/// Room interior (plus optional furniture) with smooth procedural vertex colors.
TriangleMesh synthetic_room_mesh(const SynthOptions& opts = {});

/// Head trajectory inside the room at time t seconds.
Pose synthetic_trajectory(double t, const SynthOptions& opts = {});

struct SynthSummary {
  std::size_t rgb_frames = 0;
  std::size_t depth_frames = 0;
  std::size_t test_poses = 0;
};

/// Writes a capture dataset rendered from the room mesh:
///   <out>/calibration.json, rgb/, depth/, poses_rgb.csv, poses_depth.csv
///   <out>/room_mesh.ply          ground-truth mesh
///   <out>/test/poses.csv         held-out poses between capture frames
///   <out>/test/rgb/<ts>.png      ground-truth views for those poses
SynthSummary generate_synthetic_room(const std::filesystem::path& out, const SynthOptions& opts = {});

}  // namespace stabilens
