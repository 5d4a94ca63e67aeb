#include "stabilens/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

namespace stabilens {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

// Decodes into 8- or 16-bit samples with the requested channel count.
template <typename T>
Image<T> read_png_raw(const std::filesystem::path& path, int want_channels, int want_bits) {
  FilePtr f = open_file(path, "rb");
  std::string what;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &what, png_error_handler, png_warning_handler);
  if (!png) throw IoError("png init failed for " + path.string());
  png_infop info = png_create_info_struct(png);
  Image<T> out;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("cannot decode " + path.string() + ": " + what);
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (want_bits == 8 && bit_depth == 16) png_set_strip_16(png);
  if (want_bits == 16 && bit_depth < 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("expected a 16-bit PNG: " + path.string());
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool gray = (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA);
  if (want_channels == 3 && gray) png_set_gray_to_rgb(png);
  if (want_channels == 1 && !gray) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("expected a single-channel PNG: " + path.string());
  }
  if (want_bits == 16) png_set_swap(png);  // PNG is big-endian; host is little-endian.
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  out = Image<T>(w, h, want_channels);
  rows.resize(h);
  for (int y = 0; y < h; ++y)
    rows[y] = reinterpret_cast<png_bytep>(out.pixels().data() + static_cast<std::size_t>(y) * w * want_channels);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

template <typename T>
void write_png_raw(const std::filesystem::path& path, const Image<T>& img, int color_type, int bits) {
  FilePtr f = open_file(path, "wb");
  std::string what;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &what, png_error_handler, png_warning_handler);
  if (!png) throw IoError("png init failed for " + path.string());
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(img.height());
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode " + path.string() + ": " + what);
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 1);
  png_set_IHDR(png, info, img.width(), img.height(), bits, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bits == 16) png_set_swap(png);
  for (int y = 0; y < img.height(); ++y)
    rows[y] = reinterpret_cast<png_bytep>(const_cast<T*>(img.pixels().data()) +
                                          static_cast<std::size_t>(y) * img.width() * img.channels());
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(f.get()) != 0) throw IoError("cannot write " + path.string());
}

}  // namespace

RgbImage read_png_rgb(const std::filesystem::path& path) { return read_png_raw<std::uint8_t>(path, 3, 8); }

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  if (img.channels() != 3) throw InvalidInput("write_png_rgb: image must have 3 channels");
  write_png_raw(path, img, PNG_COLOR_TYPE_RGB, 8);
}

DepthImage read_png_depth_mm(const std::filesystem::path& path) {
  const auto raw = read_png_raw<std::uint16_t>(path, 1, 16);
  DepthImage out(raw.width(), raw.height(), 1);
  auto src = raw.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) * 0.001f;
  return out;
}

void write_png_depth_mm(const std::filesystem::path& path, const DepthImage& depth) {
  if (depth.channels() != 1) throw InvalidInput("write_png_depth_mm: depth must have 1 channel");
  Image<std::uint16_t> raw(depth.width(), depth.height(), 1);
  auto src = depth.pixels();
  auto dst = raw.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double mm = std::round(static_cast<double>(src[i]) * 1000.0);
    dst[i] = (std::isfinite(mm) && mm > 0 && mm <= 65535) ? static_cast<std::uint16_t>(mm) : 0;
  }
  write_png_raw(path, raw, PNG_COLOR_TYPE_GRAY, 16);
}

GrayImage to_luma(const RgbImage& img) {
  if (img.channels() != 3) throw InvalidInput("to_luma: expected RGB");
  GrayImage out(img.width(), img.height(), 1);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i)
    dst[i] = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
  return out;
}

void write_depth_pfm(const std::filesystem::path& path, const DepthImage& depth) {
  FilePtr f = open_file(path, "wb");
  std::fprintf(f.get(), "Pf\n%d %d\n-1.0\n", depth.width(), depth.height());
  for (int y = depth.height() - 1; y >= 0; --y)
    if (std::fwrite(&depth.at(0, y), sizeof(float), depth.width(), f.get()) != static_cast<std::size_t>(depth.width()))
      throw IoError("cannot write " + path.string());
}

DepthImage read_depth_pfm(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  char magic[3] = {};
  int w = 0, h = 0;
  double scale = 0;
  if (std::fscanf(f.get(), "%2s %d %d %lf", magic, &w, &h, &scale) != 4 || std::string(magic) != "Pf" || scale >= 0)
    throw IoError("not a little-endian grayscale PFM: " + path.string());
  std::fgetc(f.get());
  DepthImage out(w, h, 1);
  for (int y = h - 1; y >= 0; --y)
    if (std::fread(&out.at(0, y), sizeof(float), w, f.get()) != static_cast<std::size_t>(w))
      throw IoError("truncated PFM: " + path.string());
  return out;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (!(sigma > 0) || radius < 0) throw InvalidInput("gaussian_kernel: need sigma > 0 and radius >= 0");
  std::vector<double> k(2 * radius + 1);
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) sum += k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;
  return k;
}

namespace {

Image<double> blur_impl(const Image<double>& in, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  const auto k = gaussian_kernel(sigma, r);
  const int w = in.width(), h = in.height(), ch = in.channels();
  Image<double> tmp(w, h, ch), out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double s = 0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * in.at(std::clamp(x + i, 0, w - 1), y, c);
        tmp.at(x, y, c) = s;
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        double s = 0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1), c);
        out.at(x, y, c) = s;
      }
  return out;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& img, double sigma) { return blur_impl(img, sigma); }

Image<double> gaussian_blur_channels(const RgbImage& img, double sigma) {
  Image<double> d(img.width(), img.height(), img.channels());
  std::copy(img.pixels().begin(), img.pixels().end(), d.pixels().begin());
  return blur_impl(d, sigma);
}

}  // namespace stabilens
