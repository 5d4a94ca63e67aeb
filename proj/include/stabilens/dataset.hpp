#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "stabilens/camera.hpp"
#include "stabilens/image.hpp"

namespace stabilens {

enum class FrameKind { kRgb, kDepth };

struct FrameRecord {
  std::int64_t timestamp_us = 0;
  FrameKind kind = FrameKind::kRgb;
  std::filesystem::path image_path;  // relative to the dataset root
  Pose pose;
};

struct Calibration {
  CameraIntrinsics intr;
  Distortion dist;

  friend bool operator==(const Calibration&, const Calibration&) = default;
};

/// Localized RGB-D capture.
///
/// On-disk layout (relative to root):
///   calibration.json            {"rgb": {...}, "depth": {...}} with fx fy cx cy width height k1 k2 k3 p1 p2
///   rgb/<timestamp_us>.png      8-bit RGB
///   depth/<timestamp_us>.png    16-bit millimeters, 0 = invalid
///   poses_rgb.csv, poses_depth.csv
///       header, then timestamp_us, r00..r22 (row-major camera-to-world), tx, ty, tz
struct CaptureDataset {
  std::filesystem::path root;
  std::vector<FrameRecord> rgb_frames;
  std::vector<FrameRecord> depth_frames;
  Calibration rgb_calib;
  Calibration depth_calib;

  /// Decodes an RGB frame; IoError names the path, FormatError on size mismatch.
  RgbImage load_rgb(const FrameRecord& rec) const;
  /// Decodes a depth frame in meters.
  DepthImage load_depth(const FrameRecord& rec) const;
};

struct LoadOptions {
  /// Check that every referenced image exists at load time instead of on access.
  bool check_images_eagerly = false;
};

/// Reads calibration.json; returns {rgb, depth}.
std::pair<Calibration, Calibration> read_calibration(const std::filesystem::path& calib_path);

CaptureDataset load_dataset(const std::filesystem::path& root, const LoadOptions& opts = {});

/// Writes calibration.json and both pose files; images are written by the caller.
void save_dataset_metadata(const CaptureDataset& ds, const std::filesystem::path& root);

std::vector<FrameRecord> read_pose_csv(const std::filesystem::path& csv, FrameKind kind);
void write_pose_csv(const std::filesystem::path& csv, std::span<const FrameRecord> frames);

/// Nearest RGB frame in time (ties go to the earlier frame). rgb_frames must be
/// non-empty and sorted by timestamp.
const FrameRecord& associate_frames(const FrameRecord& depth, std::span<const FrameRecord> rgb_frames);

/// associate_frames, but nullopt when the nearest frame is more than max_gap_us away.
std::optional<FrameRecord> associate_within(const FrameRecord& depth, std::span<const FrameRecord> rgb_frames,
                                            std::int64_t max_gap_us);

inline constexpr std::int64_t kDefaultMaxAssociationGapUs = 250'000;

std::filesystem::path frame_image_path(FrameKind kind, std::int64_t timestamp_us);

}  // namespace stabilens
