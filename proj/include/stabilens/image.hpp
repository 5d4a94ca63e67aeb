#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "stabilens/error.hpp"

namespace stabilens {

/// Row-major interleaved image with a compile-time sample type.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels <= 0) throw InvalidInput("Image: bad dimensions");
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  bool same_shape(const Image& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const Image& a, const Image& b) { return a.same_shape(b) && a.data_ == b.data_; }

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using RgbImage = Image<std::uint8_t>;    // 3 channels
using DepthImage = Image<float>;         // 1 channel, meters, 0 = invalid
using GrayImage = Image<double>;         // 1 channel

/// Reads an 8-bit PNG and returns it as RGB (gray and alpha are converted).
RgbImage read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);

/// 16-bit single-channel PNG holding millimeters; converted to meters, 0 stays invalid.
DepthImage read_png_depth_mm(const std::filesystem::path& path);
/// Meters rounded to millimeters; values outside (0, 65.535] are written as 0.
void write_png_depth_mm(const std::filesystem::path& path, const DepthImage& depth);

/// BT.601 luma in [0,255] units.
GrayImage to_luma(const RgbImage& img);

/// Little-endian single-channel PFM, rows bottom to top as the format requires.
void write_depth_pfm(const std::filesystem::path& path, const DepthImage& depth);
DepthImage read_depth_pfm(const std::filesystem::path& path);

/// Normalized 1-D Gaussian taps covering [-radius, radius].
std::vector<double> gaussian_kernel(double sigma, int radius);

/// Separable Gaussian blur with radius ceil(3 sigma) and clamped borders, per channel.
GrayImage gaussian_blur(const GrayImage& img, double sigma);
Image<double> gaussian_blur_channels(const RgbImage& img, double sigma);

}  // namespace stabilens
