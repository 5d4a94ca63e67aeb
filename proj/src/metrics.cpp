#include "stabilens/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "stabilens/parallel.hpp"

namespace stabilens {
namespace {

template <typename T>
std::optional<double> psnr_impl(const Image<T>& a, const Image<T>& b, double max_value) {
  if (!a.same_shape(b)) throw InvalidInput("psnr: image dimensions differ");
  if (a.empty()) throw InvalidInput("psnr: empty images");
  if (!(max_value > 0)) throw InvalidInput("psnr: max value must be positive");
  double sse = 0;
  auto pa = a.pixels(), pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    sse += d * d;
  }
  if (sse == 0) return std::nullopt;
  const double mse = sse / static_cast<double>(pa.size());
  return 10.0 * std::log10(max_value * max_value / mse);
}

// Valid-mode separable filtering: output (w-10)x(h-10).
GrayImage filter_valid(const GrayImage& in, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int w = in.width(), h = in.height();
  const int ow = w - n + 1, oh = h - n + 1;
  GrayImage tmp(ow, h), out(ow, oh);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * in.at(x + i, y);
      tmp.at(x, y) = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp.at(x, y + i);
      out.at(x, y) = s;
    }
  return out;
}

GrayImage product(const GrayImage& a, const GrayImage& b) {
  GrayImage out(a.width(), a.height());
  for (std::size_t i = 0; i < out.size(); ++i) out.pixels()[i] = a.pixels()[i] * b.pixels()[i];
  return out;
}

GrayImage channel(const RgbImage& img, int c) {
  GrayImage out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(x, y) = img.at(x, y, c);
  return out;
}

}  // namespace

std::optional<double> psnr(const RgbImage& a, const RgbImage& b, double max_value) { return psnr_impl(a, b, max_value); }
std::optional<double> psnr(const GrayImage& a, const GrayImage& b, double max_value) {
  return psnr_impl(a, b, max_value);
}

double ssim(const GrayImage& a, const GrayImage& b, double max_value) {
  if (!a.same_shape(b) || a.channels() != 1) throw InvalidInput("ssim: image dimensions differ");
  if (a.width() < kSsimWindow || a.height() < kSsimWindow)
    throw InvalidInput("ssim: images must be at least 11x11");
  const auto k = gaussian_kernel(kSsimSigma, kSsimWindow / 2);
  const double c1 = (0.01 * max_value) * (0.01 * max_value);
  const double c2 = (0.03 * max_value) * (0.03 * max_value);
  const GrayImage mu_a = filter_valid(a, k), mu_b = filter_valid(b, k);
  const GrayImage e_aa = filter_valid(product(a, a), k), e_bb = filter_valid(product(b, b), k);
  const GrayImage e_ab = filter_valid(product(a, b), k);
  double sum = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a.pixels()[i], mb = mu_b.pixels()[i];
    const double va = e_aa.pixels()[i] - ma * ma, vb = e_bb.pixels()[i] - mb * mb;
    const double cov = e_ab.pixels()[i] - ma * mb;
    sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

double ssim(const RgbImage& a, const RgbImage& b, double max_value, SsimMode mode) {
  if (!a.same_shape(b)) throw InvalidInput("ssim: image dimensions differ");
  if (mode == SsimMode::kLuma) return ssim(to_luma(a), to_luma(b), max_value);
  double total = 0;
  for (int c = 0; c < a.channels(); ++c) total += ssim(channel(a, c), channel(b, c), max_value);
  return total / a.channels();
}

std::string SequenceReport::table_line() const {
  char buf[64];
  if (mean_psnr_db)
    std::snprintf(buf, sizeof buf, "%.2f | %.2f", *mean_psnr_db, mean_ssim);
  else
    std::snprintf(buf, sizeof buf, "inf | %.2f", mean_ssim);
  return label + ": " + buf;
}

void SequenceReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "frame_index,psnr_db,ssim\n";
  char buf[96];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].psnr_db)
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, *frames[i].psnr_db, frames[i].ssim);
    else
      std::snprintf(buf, sizeof buf, "%zu,inf,%.17g\n", i, frames[i].ssim);
    out << buf;
  }
  if (!out) throw IoError("cannot write " + path.string());
}

SequenceReport evaluate_sequence(std::span<const RgbImage> renders, std::span<const RgbImage> ground_truth,
                                 const std::string& label, SsimMode mode) {
  if (renders.size() != ground_truth.size())
    throw InvalidInput("evaluate_sequence: " + std::to_string(renders.size()) + " renders vs " +
                       std::to_string(ground_truth.size()) + " ground-truth images");
  if (renders.empty()) throw InvalidInput("evaluate_sequence: no frames");
  SequenceReport r;
  r.label = label;
  r.frames.resize(renders.size());
  parallel_for(renders.size(), [&](std::size_t i) {
    if (!renders[i].same_shape(ground_truth[i]))
      throw InvalidInput("evaluate_sequence: frame " + std::to_string(i) + " dimensions differ");
    r.frames[i] = {psnr(renders[i], ground_truth[i]), ssim(renders[i], ground_truth[i], 255.0, mode)};
  });
  double psnr_sum = 0, ssim_sum = 0;
  std::size_t finite = 0;
  for (const auto& f : r.frames) {
    ssim_sum += f.ssim;
    if (f.psnr_db) {
      psnr_sum += *f.psnr_db;
      ++finite;
    }
  }
  r.mean_ssim = ssim_sum / static_cast<double>(r.frames.size());
  if (finite) r.mean_psnr_db = psnr_sum / static_cast<double>(finite);
  return r;
}

}  // namespace stabilens
