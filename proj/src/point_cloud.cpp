#include "stabilens/point_cloud.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ply.hpp"
#include "stabilens/parallel.hpp"
#include "stabilens/spatial.hpp"

namespace stabilens {
namespace {

constexpr double kUnitNormalTolerance = 1e-4;

// Splits [0, n) into contiguous chunks and runs them through parallel_for.
template <typename F>
void parallel_chunks(std::size_t n, F&& body) {
  const std::size_t chunk = 4096;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  parallel_for(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) body(i);
  });
}

Vec3 sample_bilinear(const RgbImage& img, double u, double v) {
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = u - x0, fy = v - y0;
  Vec3 c;
  for (int ch = 0; ch < 3; ++ch) {
    const double top = (1 - fx) * img.at(x0, y0, ch) + fx * img.at(x1, y0, ch);
    const double bottom = (1 - fx) * img.at(x0, y1, ch) + fx * img.at(x1, y1, ch);
    c[ch] = ((1 - fy) * top + fy * bottom) / 255.0;
  }
  return c;
}

}  // namespace

void PointCloud::validate() const {
  if (has_colors() && colors.size() != positions.size()) throw InvalidInput("point cloud: colors length mismatch");
  if (has_normals() && normals.size() != positions.size()) throw InvalidInput("point cloud: normals length mismatch");
  for (const auto& p : positions)
    if (!p.allFinite()) throw InvalidInput("point cloud: non-finite position");
  for (const auto& n : normals)
    if (std::abs(n.norm() - 1.0) > kUnitNormalTolerance) throw InvalidInput("point cloud: normal is not unit length");
}

PointCloud PointCloud::select(std::span<const std::uint32_t> indices) const {
  PointCloud out;
  out.positions.reserve(indices.size());
  for (auto i : indices) out.positions.push_back(positions[i]);
  if (has_colors()) {
    out.colors.reserve(indices.size());
    for (auto i : indices) out.colors.push_back(colors[i]);
  }
  if (has_normals()) {
    out.normals.reserve(indices.size());
    for (auto i : indices) out.normals.push_back(normals[i]);
  }
  return out;
}

void PointCloud::append(const PointCloud& other) {
  if (other.empty()) return;
  if (empty() && colors.empty() && normals.empty()) {
    *this = other;
    return;
  }
  if (has_colors() != other.has_colors() || has_normals() != other.has_normals())
    throw InvalidInput("point cloud: cannot append clouds with different attributes");
  positions.insert(positions.end(), other.positions.begin(), other.positions.end());
  colors.insert(colors.end(), other.colors.begin(), other.colors.end());
  normals.insert(normals.end(), other.normals.begin(), other.normals.end());
}

void PointCloud::reserve(std::size_t n) {
  positions.reserve(n);
}

PointCloud build_frame_cloud(const DepthImage& depth, const CameraIntrinsics& intr, const Distortion& dist,
                             const DepthRange& range) {
  if (!(range.z_min > 0) || !(range.z_max > range.z_min)) throw InvalidInput("build_frame_cloud: bad depth range");
  intr.validate();
  if (depth.width() != intr.width || depth.height() != intr.height || depth.channels() != 1)
    throw InvalidInput("build_frame_cloud: depth image does not match intrinsics");
  PointCloud pc;
  pc.positions.reserve(depth.size());
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const double z = depth.at(x, y);
      if (!(z > 0) || z < range.z_min || z > range.z_max) continue;
      pc.positions.push_back(back_project_pixel(x, y, z, intr, dist));
    }
  }
  return pc;
}

std::vector<std::uint32_t> radius_outlier_indices(const PointCloud& pc, double radius, int min_neighbors) {
  if (!(radius > 0)) throw InvalidInput("radius_outlier_filter: radius must be positive");
  if (min_neighbors < 1) throw InvalidInput("radius_outlier_filter: min_neighbors must be at least 1");
  HashGrid grid(radius);
  grid.reserve(pc.size());
  for (std::uint32_t i = 0; i < pc.size(); ++i) grid.insert(i, pc.positions[i]);
  const double r2 = radius * radius;
  std::vector<char> keep(pc.size(), 0);
  parallel_chunks(pc.size(), [&](std::size_t i) {
    int count = 0;
    const Vec3& p = pc.positions[i];
    grid.for_each_candidate(p, radius, [&](std::uint32_t j) {
      if (j != i && (pc.positions[j] - p).squaredNorm() <= r2) ++count;
    });
    keep[i] = count >= min_neighbors;
  });
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < pc.size(); ++i)
    if (keep[i]) out.push_back(i);
  return out;
}

PointCloud radius_outlier_filter(const PointCloud& pc, double radius, int min_neighbors) {
  const auto idx = radius_outlier_indices(pc, radius, min_neighbors);
  return pc.select(idx);
}

std::vector<double> mean_knn_distances(const PointCloud& pc, int k) {
  if (k < 1) throw InvalidInput("statistical filter: k must be at least 1");
  if (pc.size() <= static_cast<std::size_t>(k))
    throw InvalidInput("statistical filter: cloud has " + std::to_string(pc.size()) + " points, needs more than k=" +
                       std::to_string(k));
  const KdTree tree(pc.positions);
  std::vector<double> mean(pc.size());
  parallel_chunks(pc.size(), [&](std::size_t i) {
    const auto nn = tree.knn(pc.positions[i], static_cast<std::size_t>(k), static_cast<std::uint32_t>(i));
    double sum = 0;
    for (const auto& n : nn) sum += std::sqrt(n.dist2);  // ascending order
    mean[i] = sum / k;
  });
  return mean;
}

std::vector<std::uint32_t> statistical_outlier_indices(const PointCloud& pc, int k, double alpha) {
  if (!(alpha > 0)) throw InvalidInput("statistical filter: alpha must be positive");
  const std::vector<double> d = mean_knn_distances(pc, k);
  const double n = static_cast<double>(d.size());
  const double mu = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double var = 0;
  for (double v : d) var += (v - mu) * (v - mu);
  const double sigma = std::sqrt(var / n);
  const double threshold = mu + alpha * sigma;
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < d.size(); ++i)
    if (d[i] <= threshold) out.push_back(i);
  return out;
}

PointCloud statistical_outlier_filter(const PointCloud& pc, int k, double alpha) {
  const auto idx = statistical_outlier_indices(pc, k, alpha);
  return pc.select(idx);
}

PointCloud colorize_frame_cloud(const PointCloud& pc_cam, const Pose& depth_pose, const Pose& rgb_pose,
                                const RgbImage& rgb, const CameraIntrinsics& rgb_intr, const Distortion& rgb_dist,
                                double edge_margin) {
  if (!(edge_margin >= 0 && edge_margin < 0.5)) throw InvalidInput("colorize: edge_margin must be in [0, 0.5)");
  if (rgb.width() != rgb_intr.width || rgb.height() != rgb_intr.height || rgb.channels() != 3)
    throw InvalidInput("colorize: rgb image does not match intrinsics");
  const double margin = edge_margin * std::min(rgb.width(), rgb.height());
  const double u_max = rgb.width() - 1 - margin;
  const double v_max = rgb.height() - 1 - margin;
  PointCloud out;
  out.positions.reserve(pc_cam.size());
  out.colors.reserve(pc_cam.size());
  for (const Vec3& p : pc_cam.positions) {
    const Vec3 world = depth_pose.to_world(p);
    const auto px = project_point(rgb_pose.to_camera(world), rgb_intr, rgb_dist);
    if (!px) continue;
    const double u = px->x(), v = px->y();
    if (!(u >= margin && v >= margin && u <= u_max && v <= v_max)) continue;
    out.positions.push_back(world);
    out.colors.push_back(sample_bilinear(rgb, u, v));
  }
  return out;
}

PointCloud voxel_downsample(const PointCloud& pc, double voxel_size, VoxelGrid* grid) {
  if (!(voxel_size > 0)) throw InvalidInput("voxel_downsample: voxel size must be positive");
  const std::size_t n = pc.size();
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keyed(n);
  for (std::uint32_t i = 0; i < n; ++i) keyed[i] = {CellKey::of(pc.positions[i], voxel_size), i};
  std::sort(keyed.begin(), keyed.end());

  PointCloud out;
  if (grid) {
    grid->voxel_size = voxel_size;
    grid->voxel_of_point.resize(n);
    grid->occupied.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3& p = pc.positions[i];
      grid->voxel_of_point[i] = {CellKey::coord(p.x(), voxel_size), CellKey::coord(p.y(), voxel_size),
                                 CellKey::coord(p.z(), voxel_size)};
    }
  }
  for (std::size_t begin = 0; begin < n;) {
    std::size_t end = begin;
    Vec3 pos = Vec3::Zero(), col = Vec3::Zero(), nrm = Vec3::Zero();
    while (end < n && keyed[end].first == keyed[begin].first) {
      const std::uint32_t i = keyed[end].second;
      pos += pc.positions[i];
      if (pc.has_colors()) col += pc.colors[i];
      if (pc.has_normals()) nrm += pc.normals[i];
      ++end;
    }
    const double count = static_cast<double>(end - begin);
    out.positions.push_back(pos / count);
    if (pc.has_colors()) out.colors.push_back(col / count);
    if (pc.has_normals()) {
      const double len = nrm.norm();
      out.normals.push_back(len > 1e-12 ? Vec3(nrm / len) : pc.normals[keyed[begin].second]);
    }
    if (grid) grid->occupied.push_back(grid->voxel_of_point[keyed[begin].second]);
    begin = end;
  }
  return out;
}

PointCloud dedup_merge(const PointCloud& scene, const PointCloud& incoming, double min_separation) {
  if (!(min_separation > 0)) throw InvalidInput("dedup_merge: min_separation must be positive");
  PointCloud out = scene;
  if (incoming.empty()) return out;
  if (!scene.empty() &&
      (scene.has_colors() != incoming.has_colors() || scene.has_normals() != incoming.has_normals()))
    throw InvalidInput("dedup_merge: clouds carry different attributes");
  if (scene.empty()) {
    out.colors.clear();
    out.normals.clear();
  }
  HashGrid grid(min_separation);
  grid.reserve(scene.size());
  for (std::uint32_t i = 0; i < scene.size(); ++i) grid.insert(i, scene.positions[i]);
  const double r2 = min_separation * min_separation;
  out.reserve(scene.size() + incoming.size());
  for (std::size_t j = 0; j < incoming.size(); ++j) {
    const Vec3& p = incoming.positions[j];
    bool clash = false;
    grid.for_each_candidate(p, min_separation, [&](std::uint32_t i) {
      if (!clash && (scene.positions[i] - p).squaredNorm() < r2) clash = true;
    });
    if (clash) continue;
    out.positions.push_back(p);
    if (incoming.has_colors()) out.colors.push_back(incoming.colors[j]);
    if (incoming.has_normals()) out.normals.push_back(incoming.normals[j]);
  }
  return out;
}

SceneBuild build_scene_cloud(const CaptureDataset& dataset, const ReconstructionConfig& config) {
  const double min_sep = config.min_separation > 0 ? config.min_separation : config.voxel_size;
  SceneBuild result;
  const auto& depth_frames = dataset.depth_frames;
  const std::size_t batch = std::max<std::size_t>(2 * worker_count(), 1);

  struct FrameOutcome {
    PointCloud cloud;
    std::string warning;
  };

  for (std::size_t first = 0; first < depth_frames.size(); first += batch) {
    const std::size_t count = std::min(batch, depth_frames.size() - first);
    std::vector<FrameOutcome> outcomes(count);
    parallel_for(count, [&](std::size_t b) {
      const FrameRecord& rec = depth_frames[first + b];
      FrameOutcome& out = outcomes[b];
      const std::string tag = "depth frame " + std::to_string(rec.timestamp_us) + ": ";
      try {
        const auto rgb_rec = associate_within(rec, dataset.rgb_frames, config.max_association_gap_us);
        if (!rgb_rec) {
          out.warning = tag + "no RGB frame within the association gap";
          return;
        }
        const DepthImage depth = dataset.load_depth(rec);
        PointCloud pc = build_frame_cloud(depth, dataset.depth_calib.intr, dataset.depth_calib.dist, config.range);
        pc = radius_outlier_filter(pc, config.radius_filter_radius, config.radius_filter_min_neighbors);
        if (pc.size() <= static_cast<std::size_t>(config.stat_filter_k)) {
          out.warning = tag + "too few points after filtering";
          return;
        }
        pc = statistical_outlier_filter(pc, config.stat_filter_k, config.stat_filter_alpha);
        const RgbImage rgb = dataset.load_rgb(*rgb_rec);
        pc = colorize_frame_cloud(pc, rec.pose, rgb_rec->pose, rgb, dataset.rgb_calib.intr, dataset.rgb_calib.dist,
                                  config.edge_margin);
        out.cloud = voxel_downsample(pc, config.voxel_size);
      } catch (const Error& e) {
        out.warning = tag + e.what();
      }
    });
    for (auto& o : outcomes) {
      if (!o.warning.empty()) {
        result.warnings.push_back(std::move(o.warning));
        continue;
      }
      result.cloud = dedup_merge(result.cloud, o.cloud, min_sep);
      ++result.frames_merged;
    }
  }
  if (result.frames_merged == 0) throw DegenerateError("build_scene_cloud: no depth frame survived");
  if (config.final_statistical_filter && result.cloud.size() > static_cast<std::size_t>(config.stat_filter_k))
    result.cloud = statistical_outlier_filter(result.cloud, config.stat_filter_k, config.stat_filter_alpha);
  return result;
}

void write_point_cloud_ply(const std::filesystem::path& path, const PointCloud& pc) {
  pc.validate();
  std::vector<ply::Property> props;
  for (int a = 0; a < 3; ++a)
    props.push_back({std::string(1, "xyz"[a]), ply::Type::kFloat32,
                     [&pc, a](std::size_t i) { return pc.positions[i][a]; }});
  const char* channel[] = {"red", "green", "blue"};
  for (int a = 0; a < 3; ++a)
    props.push_back({channel[a], ply::Type::kUint8, [&pc, a](std::size_t i) {
                       const double c = pc.has_colors() ? pc.colors[i][a] : 1.0;
                       return std::round(std::clamp(c, 0.0, 1.0) * 255.0);
                     }});
  if (pc.has_normals()) {
    const char* nn[] = {"nx", "ny", "nz"};
    for (int a = 0; a < 3; ++a)
      props.push_back({nn[a], ply::Type::kFloat32, [&pc, a](std::size_t i) { return pc.normals[i][a]; }});
  }
  ply::write(path, pc.size(), props, nullptr);
}

PointCloud read_point_cloud_ply(const std::filesystem::path& path) {
  const ply::Data d = ply::read(path);
  auto has = [&](const char* name) { return d.vertex.count(name) > 0; };
  if (!has("x") || !has("y") || !has("z")) throw FormatError(path.string() + ": vertex positions missing");
  PointCloud pc;
  pc.positions.resize(d.vertex_count);
  const auto &x = d.vertex.at("x"), &y = d.vertex.at("y"), &z = d.vertex.at("z");
  for (std::size_t i = 0; i < d.vertex_count; ++i) pc.positions[i] = {x[i], y[i], z[i]};
  if (has("red") && has("green") && has("blue")) {
    const auto &r = d.vertex.at("red"), &g = d.vertex.at("green"), &b = d.vertex.at("blue");
    pc.colors.resize(d.vertex_count);
    for (std::size_t i = 0; i < d.vertex_count; ++i) pc.colors[i] = Vec3(r[i], g[i], b[i]) / 255.0;
  }
  if (has("nx") && has("ny") && has("nz")) {
    const auto &a = d.vertex.at("nx"), &b = d.vertex.at("ny"), &c = d.vertex.at("nz");
    pc.normals.resize(d.vertex_count);
    for (std::size_t i = 0; i < d.vertex_count; ++i) {
      const Vec3 n(a[i], b[i], c[i]);
      const double len = n.norm();
      pc.normals[i] = len > 0 ? Vec3(n / len) : Vec3(0, 0, 1);
    }
  }
  return pc;
}

}  // namespace stabilens
