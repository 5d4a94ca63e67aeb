#include "stabilens/nerf_prep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "stabilens/parallel.hpp"

namespace stabilens {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kMaxUnsharpAmount = 5.0;
constexpr int kBisectionSteps = 24;
constexpr double kUnsharpSigma = 1.5;

RgbImage unsharp(const RgbImage& in, const Image<double>& blurred, double amount) {
  RgbImage out(in.width(), in.height(), in.channels());
  auto src = in.pixels();
  auto blur = blurred.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double v = src[i] + amount * (src[i] - blur[i]);
    dst[i] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
  }
  return out;
}

json matrix_json(const Eigen::Matrix4d& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

}  // namespace

double sharpness_score(const RgbImage& img) {
  if (img.empty()) throw InvalidInput("sharpness_score: empty image");
  const GrayImage g = to_luma(img);
  const int w = g.width(), h = g.height();
  if (w < 3 || h < 3) return 0.0;
  std::vector<double> lap;
  lap.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x)
      lap.push_back(g.at(x - 1, y) + g.at(x + 1, y) + g.at(x, y - 1) + g.at(x, y + 1) - 4 * g.at(x, y));
  double mean = 0;
  for (double v : lap) mean += v;
  mean /= static_cast<double>(lap.size());
  double var = 0;
  for (double v : lap) var += (v - mean) * (v - mean);
  return var / static_cast<double>(lap.size());
}

SharpenResult sharpen_to_threshold(const RgbImage& img, double threshold) {
  if (!(threshold > 0)) throw InvalidInput("sharpen_to_threshold: threshold must be positive");
  const double s0 = sharpness_score(img);
  if (s0 >= threshold) return {img, 0.0, s0, true};
  const Image<double> blurred = gaussian_blur_channels(img, kUnsharpSigma);
  RgbImage best = unsharp(img, blurred, kMaxUnsharpAmount);
  double best_score = sharpness_score(best);
  if (best_score < threshold) return {std::move(best), kMaxUnsharpAmount, best_score, false};
  double lo = 0, hi = kMaxUnsharpAmount;
  for (int i = 0; i < kBisectionSteps; ++i) {
    const double mid = 0.5 * (lo + hi);
    RgbImage candidate = unsharp(img, blurred, mid);
    const double s = sharpness_score(candidate);
    if (s >= threshold) {
      hi = mid;
      best = std::move(candidate);
      best_score = s;
    } else {
      lo = mid;
    }
  }
  return {std::move(best), hi, best_score, true};
}

std::vector<std::pair<std::size_t, std::size_t>> frame_groups(std::size_t count, std::size_t n) {
  if (n == 0 || count < n) throw InvalidInput("frame_groups: need 1 <= groups <= frames");
  std::vector<std::pair<std::size_t, std::size_t>> groups;
  groups.reserve(n);
  const std::size_t base = count / n, extra = count % n;
  std::size_t begin = 0;
  for (std::size_t g = 0; g < n; ++g) {
    const std::size_t end = begin + base + (g < extra ? 1 : 0);
    groups.emplace_back(begin, end);
    begin = end;
  }
  return groups;
}

std::vector<SelectedFrame> select_sharp_frames(std::size_t frame_count,
                                               const std::function<RgbImage(std::size_t)>& load,
                                               std::size_t target_count, double threshold) {
  if (target_count == 0 || frame_count < target_count)
    throw InvalidInput("select_sharp_frames: requested " + std::to_string(target_count) + " frames from " +
                       std::to_string(frame_count));
  std::vector<double> scores(frame_count);
  parallel_for(frame_count, [&](std::size_t i) { scores[i] = sharpness_score(load(i)); });
  std::vector<SelectedFrame> out;
  out.reserve(target_count);
  for (const auto& [begin, end] : frame_groups(frame_count, target_count)) {
    std::size_t best = begin;
    for (std::size_t i = begin + 1; i < end; ++i)
      if (scores[i] > scores[best]) best = i;
    out.push_back({best, scores[best], {}});
  }
  parallel_for(out.size(), [&](std::size_t k) {
    RgbImage img = load(out[k].index);
    out[k].result = out[k].original_score >= threshold ? SharpenResult{std::move(img), 0.0, out[k].original_score, true}
                                                       : sharpen_to_threshold(img, threshold);
  });
  return out;
}

std::vector<SelectedFrame> select_sharp_frames(std::span<const RgbImage> frames, std::size_t target_count,
                                               double threshold) {
  return select_sharp_frames(
      frames.size(), [&](std::size_t i) { return frames[i]; }, target_count, threshold);
}

void AlignmentTransform::validate() const {
  if (!(scale > 0) || !std::isfinite(scale)) throw InvalidInput("alignment: scale must be positive");
  if (!translation_offset.allFinite()) throw InvalidInput("alignment: non-finite offset");
  if (Pose::orthonormality_error(rotation_convention) > Pose::kOrthonormalTolerance)
    throw InvalidInput("alignment: rotation convention is not orthonormal");
}

Eigen::Matrix4d AlignmentTransform::apply(const Pose& pose) const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = pose.rotation() * rotation_convention;
  m.topRightCorner<3, 1>() = scale * (pose.center() + translation_offset);
  return m;
}

Pose AlignmentTransform::invert(const Eigen::Matrix4d& m) const {
  const Mat3 r = m.topLeftCorner<3, 3>() * rotation_convention.transpose();
  const Vec3 c = m.topRightCorner<3, 1>() / scale - translation_offset;
  if (Pose::orthonormality_error(r) > 1e-4) throw FormatError("transform_matrix is not a rigid transform");
  return Pose::nearest(r, c);
}

AlignmentTransform compute_alignment(std::span<const Pose> train_poses, double target_mean_distance) {
  if (train_poses.size() < 2) throw InvalidInput("compute_alignment: need at least two poses");
  if (!(target_mean_distance > 0)) throw InvalidInput("compute_alignment: target distance must be positive");
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : train_poses) centroid += p.center();
  centroid /= static_cast<double>(train_poses.size());
  double mean = 0, extent = 0;
  for (const auto& p : train_poses) {
    mean += (p.center() - centroid).norm();
    extent = std::max(extent, p.center().cwiseAbs().maxCoeff());
  }
  mean /= static_cast<double>(train_poses.size());
  if (!(mean > 1e-12 * std::max(1.0, extent)))
    throw DegenerateError("compute_alignment: all camera centers coincide");
  AlignmentTransform a;
  a.translation_offset = -centroid;
  a.scale = target_mean_distance / mean;
  return a;
}

std::vector<Pose> NerfManifest::poses() const {
  std::vector<Pose> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(alignment.invert(f.transform_matrix));
  return out;
}

fs::path export_nerf_dataset(std::span<const NerfExportFrame> frames, const AlignmentTransform& alignment,
                             const CameraIntrinsics& intr, const fs::path& out_dir, const std::string& manifest_name) {
  alignment.validate();
  intr.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  json jframes = json::array();
  for (const auto& f : frames) {
    const std::string rel = "images/" + f.name + ".png";
    if (f.image) write_png_rgb(out_dir / rel, *f.image);
    jframes.push_back({{"file_path", rel}, {"transform_matrix", matrix_json(alignment.apply(f.pose))}});
  }
  json m{{"w", intr.width},
         {"h", intr.height},
         {"fl_x", intr.fx},
         {"fl_y", intr.fy},
         {"cx", intr.cx},
         {"cy", intr.cy},
         {"camera_angle_x", 2 * std::atan(intr.width / (2 * intr.fx))},
         {"camera_angle_y", 2 * std::atan(intr.height / (2 * intr.fy))},
         {"alignment",
          {{"translation_offset", {alignment.translation_offset.x(), alignment.translation_offset.y(),
                                   alignment.translation_offset.z()}},
           {"scale", alignment.scale},
           {"rotation_convention", matrix_json([&] {
              Eigen::Matrix4d r = Eigen::Matrix4d::Identity();
              r.topLeftCorner<3, 3>() = alignment.rotation_convention;
              return r;
            }())}}},
         {"frames", std::move(jframes)}};
  const fs::path path = out_dir / manifest_name;
  std::ofstream out(path);
  out << m.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
  return path;
}

NerfManifest read_nerf_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  NerfManifest m;
  try {
    const json j = json::parse(in);
    m.intr = {j.at("fl_x").get<double>(), j.at("fl_y").get<double>(), j.at("cx").get<double>(),
              j.at("cy").get<double>(), j.at("w").get<int>(), j.at("h").get<int>()};
    auto read4 = [](const json& rows) {
      Eigen::Matrix4d r;
      for (int i = 0; i < 4; ++i)
        for (int k = 0; k < 4; ++k) r(i, k) = rows.at(i).at(k).get<double>();
      return r;
    };
    if (j.contains("alignment")) {
      const json& a = j.at("alignment");
      for (int i = 0; i < 3; ++i) m.alignment.translation_offset[i] = a.at("translation_offset").at(i).get<double>();
      m.alignment.scale = a.at("scale").get<double>();
      if (a.contains("rotation_convention"))
        m.alignment.rotation_convention = read4(a.at("rotation_convention")).topLeftCorner<3, 3>();
    }
    for (const auto& f : j.at("frames"))
      m.frames.push_back({f.at("file_path").get<std::string>(), read4(f.at("transform_matrix"))});
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    m.intr.validate();
    m.alignment.validate();
  } catch (const InvalidInput& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace stabilens
