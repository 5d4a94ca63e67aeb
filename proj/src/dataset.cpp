#include "stabilens/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>

#include <json.hpp>

namespace stabilens {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kind_dir(FrameKind kind) { return kind == FrameKind::kRgb ? "rgb" : "depth"; }

Calibration parse_calibration_block(const json& block, const std::string& name) {
  Calibration c;
  try {
    c.intr.fx = block.at("fx").get<double>();
    c.intr.fy = block.at("fy").get<double>();
    c.intr.cx = block.at("cx").get<double>();
    c.intr.cy = block.at("cy").get<double>();
    c.intr.width = block.at("width").get<int>();
    c.intr.height = block.at("height").get<int>();
    c.dist.k1 = block.value("k1", 0.0);
    c.dist.k2 = block.value("k2", 0.0);
    c.dist.k3 = block.value("k3", 0.0);
    c.dist.p1 = block.value("p1", 0.0);
    c.dist.p2 = block.value("p2", 0.0);
  } catch (const json::exception& e) {
    throw FormatError("calibration." + name + ": " + e.what());
  }
  try {
    c.intr.validate();
    c.dist.validate();
  } catch (const InvalidInput& e) {
    throw FormatError("calibration." + name + ": " + e.what());
  }
  return c;
}

json calibration_block(const Calibration& c) {
  return json{{"fx", c.intr.fx}, {"fy", c.intr.fy}, {"cx", c.intr.cx}, {"cy", c.intr.cy},
              {"width", c.intr.width}, {"height", c.intr.height}, {"k1", c.dist.k1}, {"k2", c.dist.k2},
              {"k3", c.dist.k3}, {"p1", c.dist.p1}, {"p2", c.dist.p2}};
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

fs::path frame_image_path(FrameKind kind, std::int64_t timestamp_us) {
  return fs::path(kind_dir(kind)) / (std::to_string(timestamp_us) + ".png");
}

std::vector<FrameRecord> read_pose_csv(const fs::path& csv, FrameKind kind) {
  std::ifstream in(csv);
  if (!in) throw FormatError("missing pose file " + csv.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(csv.string() + ": empty file");
  std::vector<FrameRecord> frames;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 13)
      throw FormatError(csv.string() + ":" + std::to_string(line_no) + ": expected 13 columns");
    FrameRecord rec;
    rec.kind = kind;
    Mat3 r;
    Vec3 t;
    try {
      std::size_t used = 0;
      rec.timestamp_us = std::stoll(cells[0], &used);
      for (int i = 0; i < 9; ++i) r(i / 3, i % 3) = std::stod(cells[1 + i]);
      for (int i = 0; i < 3; ++i) t(i) = std::stod(cells[10 + i]);
    } catch (const std::exception&) {
      throw FormatError(csv.string() + ":" + std::to_string(line_no) + ": unparsable number");
    }
    try {
      rec.pose = Pose(r, t);
    } catch (const InvalidInput& e) {
      throw FormatError(csv.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    rec.image_path = frame_image_path(kind, rec.timestamp_us);
    if (!frames.empty() && rec.timestamp_us <= frames.back().timestamp_us)
      throw FormatError(csv.string() + ": timestamps not strictly increasing at record " +
                        std::to_string(frames.size()) + " (line " + std::to_string(line_no) + ")");
    frames.push_back(std::move(rec));
  }
  return frames;
}

void write_pose_csv(const fs::path& csv, std::span<const FrameRecord> frames) {
  std::ofstream out(csv);
  if (!out) throw IoError("cannot write " + csv.string());
  out << "timestamp_us,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz\n";
  char buf[64];
  for (const auto& f : frames) {
    out << f.timestamp_us;
    const Mat3& r = f.pose.rotation();
    for (int i = 0; i < 9; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", r(i / 3, i % 3));
      out << buf;
    }
    for (int i = 0; i < 3; ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", f.pose.translation()(i));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("cannot write " + csv.string());
}

std::pair<Calibration, Calibration> read_calibration(const fs::path& calib_path) {
  std::ifstream calib_in(calib_path);
  if (!calib_in) throw FormatError("missing calibration: " + calib_path.string());
  json calib;
  try {
    calib = json::parse(calib_in);
  } catch (const json::exception& e) {
    throw FormatError("calibration.json: " + std::string(e.what()));
  }
  if (!calib.contains("rgb") || !calib.contains("depth"))
    throw FormatError("calibration.json: needs \"rgb\" and \"depth\" blocks");
  return {parse_calibration_block(calib["rgb"], "rgb"), parse_calibration_block(calib["depth"], "depth")};
}

CaptureDataset load_dataset(const fs::path& root, const LoadOptions& opts) {
  CaptureDataset ds;
  ds.root = root;
  std::tie(ds.rgb_calib, ds.depth_calib) = read_calibration(root / "calibration.json");

  ds.rgb_frames = read_pose_csv(root / "poses_rgb.csv", FrameKind::kRgb);
  ds.depth_frames = read_pose_csv(root / "poses_depth.csv", FrameKind::kDepth);
  if (ds.rgb_frames.empty()) throw FormatError("poses_rgb.csv lists no frames");
  if (ds.depth_frames.empty()) throw FormatError("poses_depth.csv lists no frames");

  for (FrameKind kind : {FrameKind::kRgb, FrameKind::kDepth}) {
    const fs::path dir = root / kind_dir(kind);
    bool any = false;
    if (fs::is_directory(dir))
      for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".png") {
          any = true;
          break;
        }
    if (!any) throw FormatError("no images in " + dir.string());
  }
  if (opts.check_images_eagerly) {
    for (const auto* list : {&ds.rgb_frames, &ds.depth_frames})
      for (const auto& rec : *list)
        if (!fs::exists(root / rec.image_path)) throw FormatError("missing image " + (root / rec.image_path).string());
  }
  return ds;
}

void save_dataset_metadata(const CaptureDataset& ds, const fs::path& root) {
  fs::create_directories(root / "rgb");
  fs::create_directories(root / "depth");
  const json calib{{"rgb", calibration_block(ds.rgb_calib)}, {"depth", calibration_block(ds.depth_calib)}};
  std::ofstream out(root / "calibration.json");
  if (!out) throw IoError("cannot write " + (root / "calibration.json").string());
  out << calib.dump(2) << '\n';
  write_pose_csv(root / "poses_rgb.csv", ds.rgb_frames);
  write_pose_csv(root / "poses_depth.csv", ds.depth_frames);
}

RgbImage CaptureDataset::load_rgb(const FrameRecord& rec) const {
  const fs::path path = root / rec.image_path;
  if (!fs::exists(path)) throw IoError("unreadable image " + path.string());
  RgbImage img = read_png_rgb(path);
  if (img.width() != rgb_calib.intr.width || img.height() != rgb_calib.intr.height)
    throw FormatError(path.string() + ": size does not match rgb calibration");
  return img;
}

DepthImage CaptureDataset::load_depth(const FrameRecord& rec) const {
  const fs::path path = root / rec.image_path;
  if (!fs::exists(path)) throw IoError("unreadable image " + path.string());
  DepthImage img = read_png_depth_mm(path);
  if (img.width() != depth_calib.intr.width || img.height() != depth_calib.intr.height)
    throw FormatError(path.string() + ": size does not match depth calibration");
  return img;
}

const FrameRecord& associate_frames(const FrameRecord& depth, std::span<const FrameRecord> rgb_frames) {
  if (rgb_frames.empty()) throw InvalidInput("associate_frames: no rgb frames");
  const auto it = std::lower_bound(rgb_frames.begin(), rgb_frames.end(), depth.timestamp_us,
                                   [](const FrameRecord& r, std::int64_t t) { return r.timestamp_us < t; });
  if (it == rgb_frames.begin()) return *it;
  if (it == rgb_frames.end()) return *(it - 1);
  const auto& after = *it;
  const auto& before = *(it - 1);
  // Ties resolve toward the earlier frame.
  return (after.timestamp_us - depth.timestamp_us) < (depth.timestamp_us - before.timestamp_us) ? after : before;
}

std::optional<FrameRecord> associate_within(const FrameRecord& depth, std::span<const FrameRecord> rgb_frames,
                                            std::int64_t max_gap_us) {
  const FrameRecord& best = associate_frames(depth, rgb_frames);
  const std::int64_t gap = best.timestamp_us > depth.timestamp_us ? best.timestamp_us - depth.timestamp_us
                                                                  : depth.timestamp_us - best.timestamp_us;
  if (gap > max_gap_us) return std::nullopt;
  return best;
}

}  // namespace stabilens
