#include "stabilens/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stabilens/camera.hpp"
#include "stabilens/dataset.hpp"
#include "stabilens/error.hpp"
#include "stabilens/meshing.hpp"
#include "stabilens/metrics.hpp"
#include "stabilens/nerf_prep.hpp"
#include "stabilens/point_cloud.hpp"
#include "stabilens/pose_stream.hpp"
#include "stabilens/renderer.hpp"
#include "stabilens/synth.hpp"

namespace stabilens {
namespace fs = std::filesystem;

namespace {

// Camera used by render and serve when no calibration file is given.
struct CameraArgs {
  std::string calib;
  int width = 640;
  int height = 360;
  double hfov_deg = kHoloLensHfovDeg;

  void add(CLI::App* app) {
    app->add_option("--calib", calib, "calibration.json whose rgb block is the base camera");
    app->add_option("--width", width, "base image width without --calib")->check(CLI::PositiveNumber);
    app->add_option("--height", height, "base image height without --calib")->check(CLI::PositiveNumber);
    app->add_option("--hfov-deg", hfov_deg, "base horizontal FoV without --calib");
  }
  CameraIntrinsics intrinsics() const {
    if (!calib.empty()) return read_calibration(calib).first.intr;
    return centered_intrinsics(width, height, hfov_deg);
  }
};

std::array<std::uint8_t, 3> parse_rgb(const std::string& text) {
  std::array<std::uint8_t, 3> out{};
  std::istringstream in(text);
  for (int c = 0; c < 3; ++c) {
    int v = -1;
    in >> v;
    if (!in || v < 0 || v > 255) throw InvalidInput("background must be r,g,b with values in [0, 255]: " + text);
    out[c] = static_cast<std::uint8_t>(v);
    if (c < 2 && in.get() != ',') throw InvalidInput("background must be r,g,b: " + text);
  }
  return out;
}

std::vector<fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path().filename());
  std::sort(files.begin(), files.end());
  return files;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flat key=value file. '#' starts a comment; keys are long flag names without dashes.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CLI::ValidationError("--config", "cannot read " + path.string());
  std::vector<std::pair<std::string, std::string>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--config", path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    kv.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return kv;
}

bool truthy(std::string v) {
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  return v == "1" || v == "true" || v == "yes" || v == "on";
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  return std::any_of(args.begin(), args.end(),
                     [&](const std::string& a) { return a == flag || a.rfind(flag + "=", 0) == 0; });
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err), app_("RGB-D scene reconstruction and FoV-enhanced rendering", "stabilens") {
    app_.require_subcommand(1);
    app_.add_option("--config", config_path_, "flat key=value file; command-line flags win");
    add_ingest_validate();
    add_reconstruct();
    add_mesh();
    add_render();
    add_select_frames();
    add_export_nerf();
    add_eval();
    add_serve();
    add_stream();
    add_synth();
  }

  int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
      args = apply_config(std::move(args));
      std::reverse(args.begin(), args.end());
      app_.parse(args);
    } catch (const CLI::CallForHelp&) {
      out_ << app_.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app_.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "stabilens: " << e.what() << " (see --help)\n";
      return 2;
    }
    CLI::App* sub = app_.get_subcommands().front();
    try {
      return actions_.at(sub->get_name())();
    } catch (const std::exception& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      err_ << "stabilens " << sub->get_name() << ": " << msg << '\n';
      return 1;
    }
  }

 private:
  // Pulls --config out of the argument list and appends every config key the
  // chosen subcommand knows and the command line did not set.
  std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config") {
        if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file");
        path = args[i + 1];
        args.erase(args.begin() + i, args.begin() + i + 2);
        break;
      }
      if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        args.erase(args.begin() + i);
        break;
      }
    }
    if (path.empty()) return args;
    const auto sub_it = std::find_if(args.begin(), args.end(), [](const std::string& a) { return !a.starts_with("-"); });
    if (sub_it == args.end()) return args;
    CLI::App* sub = nullptr;
    try {
      sub = app_.get_subcommand(*sub_it);
    } catch (const CLI::OptionNotFound&) {
      return args;  // the parser reports the bad subcommand
    }
    for (const auto& [key, value] : read_config(path)) {
      const std::string flag = "--" + key;
      const CLI::Option* opt = sub->get_option_no_throw(flag);
      if (opt == nullptr || given_on_command_line(args, flag)) continue;
      if (opt->get_expected_max() == 0) {
        if (truthy(value)) args.push_back(flag);
      } else {
        args.push_back(flag);
        args.push_back(value);
      }
    }
    return args;
  }

  template <class T>
  T* keep() {
    auto owned = std::make_shared<T>();
    state_.push_back(owned);
    return owned.get();
  }

  CLI::App* add(const std::string& name, const std::string& help, std::function<int()> action) {
    actions_[name] = std::move(action);
    return app_.add_subcommand(name, help);
  }

  void add_ingest_validate() {
    struct State {
      std::string in;
    };
    auto* s = keep<State>();
    auto* c = add("ingest-validate", "check a capture dataset and decode every frame", [this, s] {
      const CaptureDataset ds = load_dataset(s->in, {.check_images_eagerly = true});
      for (const auto& rec : ds.rgb_frames) ds.load_rgb(rec);
      for (const auto& rec : ds.depth_frames) ds.load_depth(rec);
      out_ << "ok: " << ds.rgb_frames.size() << " rgb frames, " << ds.depth_frames.size() << " depth frames\n";
      return 0;
    });
    c->add_option("--in", s->in, "dataset directory")->required();
  }

  void add_reconstruct() {
    struct State {
      std::string in, out;
      ReconstructionConfig cfg;
      double max_gap_ms = kDefaultMaxAssociationGapUs / 1000.0;
      bool no_final = false;
    };
    auto* s = keep<State>();
    auto* c = add("reconstruct", "fuse the depth frames into a colored point cloud", [this, s] {
      s->cfg.max_association_gap_us = static_cast<std::int64_t>(s->max_gap_ms * 1000.0);
      s->cfg.final_statistical_filter = !s->no_final;
      const CaptureDataset ds = load_dataset(s->in);
      const SceneBuild build = build_scene_cloud(ds, s->cfg);
      for (const auto& w : build.warnings) err_ << "warning: " << w << '\n';
      write_point_cloud_ply(s->out, build.cloud);
      out_ << "wrote " << build.cloud.size() << " points from " << build.frames_merged << " frames to " << s->out << '\n';
      return 0;
    });
    c->add_option("--in", s->in, "dataset directory")->required();
    c->add_option("--out", s->out, "output PLY")->required();
    c->add_option("--z-min", s->cfg.range.z_min, "nearest depth kept, meters")->capture_default_str();
    c->add_option("--z-max", s->cfg.range.z_max, "farthest depth kept, meters")->capture_default_str();
    c->add_option("--radius", s->cfg.radius_filter_radius, "radius filter radius, meters")->capture_default_str();
    c->add_option("--radius-min-neighbors", s->cfg.radius_filter_min_neighbors)->capture_default_str();
    c->add_option("--stat-k", s->cfg.stat_filter_k, "statistical filter neighbour count")->capture_default_str();
    c->add_option("--stat-alpha", s->cfg.stat_filter_alpha, "statistical filter std multiplier")->capture_default_str();
    c->add_option("--voxel", s->cfg.voxel_size, "voxel edge, meters")->capture_default_str();
    c->add_option("--min-separation", s->cfg.min_separation, "dedup distance, 0 = voxel size")->capture_default_str();
    c->add_option("--edge-margin", s->cfg.edge_margin, "fraction of the depth image border dropped")->capture_default_str();
    c->add_option("--max-gap-ms", s->max_gap_ms, "largest depth/rgb timestamp gap")->capture_default_str();
    c->add_flag("--no-final-filter", s->no_final, "skip the statistical filter on the merged cloud");
  }

  void add_mesh() {
    struct State {
      std::string in, out, dataset;
      PoissonOptions popts;
      int normal_k = 30, orient_k = 10;
      double quantile = 0.01, bbox_margin = 0.02;
    };
    auto* s = keep<State>();
    auto* c = add("mesh", "Poisson surface from a point cloud", [this, s] {
      const PointCloud pc = read_point_cloud_ply(s->in);
      std::vector<Vec3> centers;
      if (!s->dataset.empty())
        for (const auto& rec : load_dataset(s->dataset).depth_frames) centers.push_back(rec.pose.center());
      const OrientedNormals oriented = orient_normals(estimate_normals(pc, s->normal_k), centers, s->orient_k);
      PoissonStats stats;
      const TriangleMesh raw = poisson_reconstruct(oriented.cloud, s->popts, &stats);
      const auto bbox = AxisAlignedBox::bounding(pc.positions).expanded(s->bbox_margin);
      const TriangleMesh mesh = trim_mesh(raw, s->quantile, bbox);
      write_mesh_ply(s->out, mesh);
      out_ << "wrote " << mesh.vertices.size() << " vertices, " << mesh.triangles.size() << " triangles to " << s->out
           << " (" << oriented.components << " normal components, trimmed " << raw.vertices.size() - mesh.vertices.size()
           << " vertices)\n";
      return 0;
    });
    c->add_option("--in", s->in, "input point cloud PLY")->required();
    c->add_option("--out", s->out, "output mesh PLY")->required();
    c->add_option("--depth", s->popts.max_depth, "octree depth")->capture_default_str();
    c->add_option("--full-depth", s->popts.full_depth, "depth up to which the octree is complete")->capture_default_str();
    c->add_option("--scale", s->popts.scale, "bounding cube relative to the sample extent")->capture_default_str();
    c->add_option("--normal-k", s->normal_k, "neighbours for normal estimation")->capture_default_str();
    c->add_option("--orient-k", s->orient_k, "neighbours for orientation propagation")->capture_default_str();
    c->add_option("--density-quantile", s->quantile, "low-density vertices removed")->capture_default_str();
    c->add_option("--bbox-margin", s->bbox_margin, "trim box growth relative to the cloud box")->capture_default_str();
    c->add_option("--dataset", s->dataset, "capture dataset whose depth cameras orient the normals");
  }

  void add_render() {
    struct State {
      std::string scene_path, poses, out, background = "0,0,0";
      CameraArgs cam;
      std::optional<double> fov;
      RenderConfig rc;
    };
    auto* s = keep<State>();
    auto* c = add("render", "render a scene from each pose of a pose file", [this, s] {
      s->rc.intr = s->cam.intrinsics();
      if (s->fov) s->rc.intr = intrinsics_for_fov(s->rc.intr, *s->fov);
      s->rc.background = parse_rgb(s->background);
      s->rc.validate();
      const Scene scene = load_scene(s->scene_path);
      const auto frames = read_pose_csv(s->poses, FrameKind::kRgb);
      fs::create_directories(s->out);
      for (const auto& f : frames)
        write_png_rgb(fs::path(s->out) / (std::to_string(f.timestamp_us) + ".png"), render_scene(scene, f.pose, s->rc).color);
      out_ << "rendered " << frames.size() << " frames at " << s->rc.intr.hfov_deg() << " deg to " << s->out << '\n';
      return 0;
    });
    c->add_option("--scene", s->scene_path, "point cloud or mesh PLY")->required();
    c->add_option("--poses", s->poses, "pose CSV (timestamp_us, r00..r22, tx, ty, tz)")->required();
    c->add_option("--out", s->out, "output directory of <timestamp_us>.png")->required();
    c->add_option("--fov-deg", s->fov, "horizontal FoV; the base camera is rescaled to it");
    s->cam.add(c);
    c->add_option("--splat-radius", s->rc.splat_radius, "point disc radius, pixels")->capture_default_str();
    c->add_option("--near", s->rc.near, "near plane, meters")->capture_default_str();
    c->add_option("--far", s->rc.far, "far plane, meters")->capture_default_str();
    c->add_option("--background", s->background, "r,g,b of untouched pixels")->capture_default_str();
  }

  void add_select_frames() {
    struct State {
      std::string in, out;
      std::size_t count = kDefaultSelectionCount;
      double threshold = kDefaultSharpnessThreshold;
    };
    auto* s = keep<State>();
    auto* c = add("select-frames", "keep the sharpest frame of each group, sharpening weak ones", [this, s] {
      const fs::path root(s->in);
      const auto frames = read_pose_csv(root / "poses_rgb.csv", FrameKind::kRgb);
      const auto [rgb_calib, depth_calib] = read_calibration(root / "calibration.json");
      const auto picked = select_sharp_frames(
          frames.size(), [&](std::size_t i) { return read_png_rgb(root / frames[i].image_path); }, s->count, s->threshold);

      const fs::path dst(s->out);
      fs::create_directories(dst / "rgb");
      CaptureDataset meta;
      meta.rgb_calib = rgb_calib;
      meta.depth_calib = depth_calib;
      std::ofstream sel(dst / "selection.csv");
      if (!sel) throw IoError("cannot write " + (dst / "selection.csv").string());
      sel << "index,timestamp_us,score,amount,final_score,reached\n";
      std::size_t sharpened = 0, unreached = 0;
      for (const auto& p : picked) {
        const FrameRecord& rec = frames[p.index];
        write_png_rgb(dst / rec.image_path, p.result.image);
        meta.rgb_frames.push_back(rec);
        sharpened += p.sharpened();
        unreached += !p.result.reached;
        char line[160];
        std::snprintf(line, sizeof line, "%zu,%lld,%.6f,%.6f,%.6f,%d\n", p.index, static_cast<long long>(rec.timestamp_us),
                      p.original_score, p.result.amount, p.result.score, p.result.reached ? 1 : 0);
        sel << line;
      }
      save_dataset_metadata(meta, dst);
      out_ << "selected " << picked.size() << " of " << frames.size() << " frames (" << sharpened << " sharpened, "
           << unreached << " below threshold)\n";
      return 0;
    });
    c->add_option("--in", s->in, "dataset directory (calibration.json, poses_rgb.csv, rgb/)")->required();
    c->add_option("--out", s->out, "output directory")->required();
    c->add_option("--count", s->count, "frames to keep")->capture_default_str();
    c->add_option("--threshold", s->threshold, "sharpness target for kept frames")->capture_default_str();
  }

  void add_export_nerf() {
    struct State {
      std::string in, out, poses, images, calib, reuse;
      double target = 1.0;
    };
    auto* s = keep<State>();
    auto* c = add("export-nerf", "write images and an aligned camera manifest for NeRF training", [this, s] {
      const fs::path root(s->in);
      const fs::path pose_csv = s->poses.empty() ? root / "poses_rgb.csv" : fs::path(s->poses);
      const fs::path calib_file = s->calib.empty() ? root / "calibration.json" : fs::path(s->calib);
      const auto records = read_pose_csv(pose_csv, FrameKind::kRgb);
      if (records.empty()) throw InvalidInput("no poses in " + pose_csv.string());
      const CameraIntrinsics intr = read_calibration(calib_file).first.intr;

      std::vector<RgbImage> imgs;
      std::vector<Pose> train;
      imgs.reserve(records.size());
      for (const auto& r : records) {
        const fs::path p = s->images.empty() ? root / r.image_path : fs::path(s->images) / r.image_path.filename();
        imgs.push_back(read_png_rgb(p));
        train.push_back(r.pose);
      }
      const AlignmentTransform align =
          s->reuse.empty() ? compute_alignment(train, s->target) : read_nerf_manifest(s->reuse).alignment;
      std::vector<NerfExportFrame> frames;
      for (std::size_t i = 0; i < records.size(); ++i)
        frames.push_back({std::to_string(records[i].timestamp_us), &imgs[i], records[i].pose});
      const fs::path manifest = export_nerf_dataset(frames, align, intr, s->out);
      out_ << "exported " << frames.size() << " frames to " << manifest << " (scale " << align.scale << ")\n";
      return 0;
    });
    c->add_option("--in", s->in, "dataset directory, usually select-frames output")->required();
    c->add_option("--out", s->out, "output directory")->required();
    c->add_option("--poses", s->poses, "pose CSV instead of <in>/poses_rgb.csv");
    c->add_option("--images", s->images, "image directory instead of <in>/rgb");
    c->add_option("--calib", s->calib, "calibration.json instead of <in>/calibration.json");
    c->add_option("--reuse-alignment", s->reuse, "take the alignment from an existing manifest");
    c->add_option("--target-distance", s->target, "mean camera distance after alignment")->capture_default_str();
  }

  void add_eval() {
    struct State {
      std::string renders, truth, label = "sequence", csv;
      bool per_channel = false;
    };
    auto* s = keep<State>();
    auto* c = add("eval", "PSNR and SSIM of rendered frames against ground truth", [this, s] {
      const auto names = png_files(s->truth);
      if (names.empty()) throw InvalidInput("no PNG files in " + s->truth);
      std::vector<RgbImage> r, t;
      for (const auto& n : names) {
        const fs::path rp = fs::path(s->renders) / n;
        if (!fs::exists(rp)) throw IoError("missing render " + rp.string());
        r.push_back(read_png_rgb(rp));
        t.push_back(read_png_rgb(fs::path(s->truth) / n));
      }
      const SequenceReport rep =
          evaluate_sequence(r, t, s->label, s->per_channel ? SsimMode::kPerChannel : SsimMode::kLuma);
      if (!s->csv.empty()) rep.write_csv(s->csv);
      out_ << rep.table_line() << '\n';
      return 0;
    });
    c->add_option("--renders", s->renders, "directory of rendered PNGs")->required();
    c->add_option("--truth", s->truth, "directory of ground-truth PNGs; files are matched by name")->required();
    c->add_option("--label", s->label, "row label")->capture_default_str();
    c->add_option("--csv", s->csv, "per-frame CSV output");
    c->add_flag("--per-channel", s->per_channel, "average SSIM over R, G, B instead of luma");
  }

  void add_serve() {
    struct State {
      std::string scene_path, listen = "127.0.0.1:" + std::to_string(kDefaultPosePort), out_dir, raw_out, background = "0,0,0";
      CameraArgs cam;
      RenderConfig rc;
      int accept_timeout_ms = -1;
    };
    auto* s = keep<State>();
    auto* c = add("serve", "render frames for poses streamed by one client", [this, s] {
      s->rc.intr = s->cam.intrinsics();
      s->rc.background = parse_rgb(s->background);
      const Scene scene = load_scene(s->scene_path);
      std::unique_ptr<FrameSink> sink;
      std::ofstream raw;
      if (!s->out_dir.empty()) {
        sink = std::make_unique<PngDirectorySink>(s->out_dir);
      } else if (!s->raw_out.empty()) {
        raw.open(s->raw_out, std::ios::binary);
        if (!raw) throw IoError("cannot write " + s->raw_out);
        sink = std::make_unique<RawStreamSink>(raw);
      } else {
        sink = std::make_unique<NullSink>();
      }
      RenderServer server(Endpoint::parse(s->listen));
      out_ << "listening on port " << server.port() << std::endl;
      const SessionStats st = server.serve(scene_renderer(scene, s->rc), *sink, {.accept_timeout_ms = s->accept_timeout_ms});
      char line[200];
      std::snprintf(line, sizeof line, "received %zu, rendered %zu, dropped %zu, rejected %zu, latency mean %.1f ms p99 %.1f ms\n",
                    st.poses_received, st.frames_rendered, st.poses_dropped, st.packets_rejected, st.mean_latency_ms,
                    st.p99_latency_ms);
      out_ << line;
      if (st.aborted) throw ProtocolError("session aborted: " + st.diagnostic);
      return 0;
    });
    c->add_option("--scene", s->scene_path, "point cloud or mesh PLY")->required();
    c->add_option("--listen", s->listen, "host:port")->capture_default_str();
    auto* png = c->add_option("--out", s->out_dir, "directory of <sequence>.png");
    c->add_option("--raw-out", s->raw_out, "raw frame stream file")->excludes(png);
    c->add_option("--accept-timeout-ms", s->accept_timeout_ms, "give up waiting for a client, -1 = never")->capture_default_str();
    s->cam.add(c);
    c->add_option("--splat-radius", s->rc.splat_radius, "point disc radius, pixels")->capture_default_str();
    c->add_option("--near", s->rc.near, "near plane, meters")->capture_default_str();
    c->add_option("--far", s->rc.far, "far plane, meters")->capture_default_str();
    c->add_option("--background", s->background, "r,g,b of untouched pixels")->capture_default_str();
  }

  void add_stream() {
    struct State {
      std::string poses, server = "127.0.0.1:" + std::to_string(kDefaultPosePort);
      ClientOptions opts;
      double fov = kEnhancedHfovDeg;
    };
    auto* s = keep<State>();
    auto* c = add("stream", "send a pose file to a render server", [this, s] {
      s->opts.fov_deg = static_cast<float>(s->fov);
      std::vector<TimedPose> list;
      for (const auto& r : read_pose_csv(s->poses, FrameKind::kRgb)) list.push_back({r.timestamp_us, r.pose});
      const SendStats st = run_pose_client(Endpoint::parse(s->server), list, s->opts);
      out_ << "sent " << st.packets_sent << " of " << list.size() << " poses in " << st.wall_seconds << " s\n";
      if (!st.ok()) throw IoError(st.error);
      return 0;
    });
    c->add_option("--poses", s->poses, "pose CSV")->required();
    c->add_option("--server", s->server, "host:port")->capture_default_str();
    c->add_option("--rate-hz", s->opts.rate_hz, "fixed send rate instead of timestamp pacing");
    c->add_option("--fov-deg", s->fov, "requested horizontal FoV")->capture_default_str();
    c->add_option("--connect-timeout-ms", s->opts.connect_timeout_ms)->capture_default_str();
  }

  void add_synth() {
    struct State {
      std::string out;
      SynthOptions o;
      bool no_furniture = false;
    };
    auto* s = keep<State>();
    auto* c = add("synth", "generate the synthetic textured-room capture", [this, s] {
      s->o.furniture = !s->no_furniture;
      const SynthSummary st = generate_synthetic_room(s->out, s->o);
      out_ << "wrote " << st.rgb_frames << " rgb, " << st.depth_frames << " depth frames and " << st.test_poses
           << " test poses to " << s->out << '\n';
      return 0;
    });
    c->add_option("--out", s->out, "output dataset directory")->required();
    c->add_option("--duration-s", s->o.duration_s)->capture_default_str();
    c->add_option("--rgb-hz", s->o.rgb_hz)->capture_default_str();
    c->add_option("--depth-hz", s->o.depth_hz)->capture_default_str();
    c->add_option("--rgb-width", s->o.rgb_width)->capture_default_str();
    c->add_option("--rgb-height", s->o.rgb_height)->capture_default_str();
    c->add_option("--rgb-hfov-deg", s->o.rgb_hfov_deg)->capture_default_str();
    c->add_option("--depth-width", s->o.depth_width)->capture_default_str();
    c->add_option("--depth-height", s->o.depth_height)->capture_default_str();
    c->add_option("--depth-hfov-deg", s->o.depth_hfov_deg)->capture_default_str();
    c->add_option("--tessellation", s->o.tessellation, "mesh grid step, meters")->capture_default_str();
    c->add_option("--test-poses", s->o.test_poses, "held-out views")->capture_default_str();
    c->add_option("--seed", s->o.seed)->capture_default_str();
    c->add_flag("--no-furniture", s->no_furniture, "empty room");
  }

  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_;
  std::string config_path_;
  std::map<std::string, std::function<int()>> actions_;
  std::vector<std::shared_ptr<void>> state_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Cli cli(out, err);
  return cli.run(argc, argv);
}

}  // namespace stabilens
