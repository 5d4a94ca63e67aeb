#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stabilens/image.hpp"

namespace stabilens {

/// PSNR in dB over all samples; nullopt when the images are identical (infinite PSNR).
std::optional<double> psnr(const RgbImage& a, const RgbImage& b, double max_value = 255.0);
std::optional<double> psnr(const GrayImage& a, const GrayImage& b, double max_value = 255.0);

enum class SsimMode { kLuma, kPerChannel };

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), averaged over
/// every window that fits fully inside the image.
double ssim(const RgbImage& a, const RgbImage& b, double max_value = 255.0, SsimMode mode = SsimMode::kLuma);
double ssim(const GrayImage& a, const GrayImage& b, double max_value = 255.0);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

struct FrameMetrics {
  std::optional<double> psnr_db;
  double ssim = 0;
};

struct SequenceReport {
  std::string label;
  std::vector<FrameMetrics> frames;
  /// Mean over frames with finite PSNR; nullopt if every frame was identical.
  std::optional<double> mean_psnr_db;
  double mean_ssim = 0;

  /// "<label>: <mean PSNR> | <mean SSIM>"
  std::string table_line() const;
  /// frame_index,psnr_db,ssim (identical frames report psnr_db as inf).
  void write_csv(const std::filesystem::path& path) const;
};

SequenceReport evaluate_sequence(std::span<const RgbImage> renders, std::span<const RgbImage> ground_truth,
                                 const std::string& label = "sequence", SsimMode mode = SsimMode::kLuma);

}  // namespace stabilens
