#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "stabilens/camera.hpp"
#include "stabilens/image.hpp"

namespace stabilens {

/// Variance of the 4-neighbour Laplacian of BT.601 luma over interior pixels.
double sharpness_score(const RgbImage& img);

struct SharpenResult {
  RgbImage image;
  double amount = 0;  // unsharp-mask gain actually applied
  double score = 0;   // sharpness of `image`
  bool reached = true;
};

/// Smallest unsharp-mask gain in [0, 5] (sigma 1.5) whose output reaches `threshold`.
/// Images already sharp enough come back unchanged; otherwise the gain is found by
/// bisection, and if even gain 5 falls short that image is returned with reached=false.
SharpenResult sharpen_to_threshold(const RgbImage& img, double threshold);

inline constexpr double kDefaultSharpnessThreshold = 150.0;
inline constexpr std::size_t kDefaultSelectionCount = 200;

/// Half-open index ranges of `n` contiguous groups over `count` items; the first
/// count % n groups get one extra item.
std::vector<std::pair<std::size_t, std::size_t>> frame_groups(std::size_t count, std::size_t n);

struct SelectedFrame {
  std::size_t index = 0;  // position in the input sequence
  double original_score = 0;
  SharpenResult result;
  bool sharpened() const { return result.amount > 0; }
};

/// Loader-based selection so long sequences need not be held in memory at once.
std::vector<SelectedFrame> select_sharp_frames(std::size_t frame_count,
                                               const std::function<RgbImage(std::size_t)>& load,
                                               std::size_t target_count, double threshold);
std::vector<SelectedFrame> select_sharp_frames(std::span<const RgbImage> frames, std::size_t target_count,
                                               double threshold);

/// Maps our camera-to-world poses into a centred, scaled, NeRF-convention world.
struct AlignmentTransform {
  Mat3 rotation_convention = Eigen::Vector3d(1, -1, -1).asDiagonal();
  Vec3 translation_offset = Vec3::Zero();
  double scale = 1.0;

  void validate() const;
  Eigen::Matrix4d apply(const Pose& pose) const;
  Pose invert(const Eigen::Matrix4d& nerf_matrix) const;
};

/// Offset moves the camera-centre centroid to the origin; scale brings the mean
/// centre distance to `target_mean_distance`.
AlignmentTransform compute_alignment(std::span<const Pose> train_poses, double target_mean_distance = 1.0);

struct NerfExportFrame {
  std::string name;  // image file stem
  const RgbImage* image = nullptr;
  Pose pose;
};

struct NerfManifest {
  CameraIntrinsics intr;
  AlignmentTransform alignment;
  struct Frame {
    std::string file_path;
    Eigen::Matrix4d transform_matrix;
  };
  std::vector<Frame> frames;

  std::vector<Pose> poses() const;
};

inline constexpr const char* kNerfManifestName = "nerf_transforms.json";

/// Writes out_dir/images/<name>.png plus the manifest `manifest_name`.
std::filesystem::path export_nerf_dataset(std::span<const NerfExportFrame> frames, const AlignmentTransform& alignment,
                                          const CameraIntrinsics& intr, const std::filesystem::path& out_dir,
                                          const std::string& manifest_name = kNerfManifestName);

NerfManifest read_nerf_manifest(const std::filesystem::path& path);

}  // namespace stabilens
