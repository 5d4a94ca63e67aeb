#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stabilens/camera.hpp"
#include "stabilens/image.hpp"
#include "stabilens/renderer.hpp"

namespace stabilens {

inline constexpr std::size_t kPosePacketSize = 78;
inline constexpr std::uint8_t kPoseProtocolVersion = 1;
inline constexpr std::uint8_t kFlagEndOfStream = 0x01;
inline constexpr std::uint16_t kDefaultPosePort = 9750;

using PacketBytes = std::array<std::uint8_t, kPosePacketSize>;

/// Wire layout, little-endian:
///   0 magic "HLPS" | 4 version | 5 flags | 6 sequence u32 | 10 timestamp_us u64 |
///   18 pose 12 x f32 (row-major 3x4 camera-to-world) | 66 fov_deg f32 |
///   70 reserved u32 (zero) | 74 crc32 over bytes 0..73
struct PosePacket {
  std::uint8_t version = kPoseProtocolVersion;
  std::uint8_t flags = 0;
  std::uint32_t sequence = 0;
  std::uint64_t timestamp_us = 0;
  std::array<float, 12> pose{};
  float fov_deg = 0;

  bool end_of_stream() const { return flags & kFlagEndOfStream; }
  /// Camera-to-world pose, re-orthonormalized from the float rotation.
  Pose to_pose() const;

  friend bool operator==(const PosePacket&, const PosePacket&) = default;
};

/// CRC-32 (IEEE 802.3, reflected, init and final xor 0xFFFFFFFF).
std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes);

PacketBytes encode_pose_packet(std::uint32_t sequence, std::uint64_t timestamp_us, const Pose& pose, float fov_deg,
                               std::uint8_t flags = 0);

/// Reads exactly the first 78 bytes. Throws ProtocolError on short input, bad magic
/// or version, IntegrityError on a CRC mismatch and SemanticError when the pose or
/// field of view is unusable.
PosePacket decode_pose_packet(std::span<const std::uint8_t> bytes);

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = kDefaultPosePort;

  /// "host:port", "host" or ":port".
  static Endpoint parse(const std::string& text);
  std::string str() const;
};

/// Destination for rendered frames.
class FrameSink {
 public:
  virtual ~FrameSink() = default;
  virtual void write(std::uint32_t sequence, const RgbImage& frame) = 0;
};

/// Writes <dir>/<sequence>.png.
class PngDirectorySink : public FrameSink {
 public:
  explicit PngDirectorySink(std::filesystem::path dir);
  void write(std::uint32_t sequence, const RgbImage& frame) override;

 private:
  std::filesystem::path dir_;
};

/// Per frame: u32 sequence, u32 width, u32 height, then width*height*3 RGB bytes.
class RawStreamSink : public FrameSink {
 public:
  explicit RawStreamSink(std::ostream& out) : out_(out) {}
  void write(std::uint32_t sequence, const RgbImage& frame) override;

 private:
  std::ostream& out_;
};

class NullSink : public FrameSink {
 public:
  void write(std::uint32_t, const RgbImage&) override {}
};

struct SessionStats {
  std::size_t poses_received = 0;
  std::size_t frames_rendered = 0;
  std::size_t poses_dropped = 0;     // superseded in the mailbox before being rendered
  std::size_t packets_rejected = 0;  // semantic errors
  std::vector<std::uint32_t> rendered_sequences;
  double mean_latency_ms = 0;  // packet receipt to frame written
  double p99_latency_ms = 0;
  bool end_of_stream = false;
  bool aborted = false;
  std::string diagnostic;
};

using FrameRenderer = std::function<RgbImage(const PosePacket&)>;

struct ServerOptions {
  /// Give up waiting for a client after this long; negative waits forever.
  int accept_timeout_ms = -1;
};

/// Listening socket bound at construction so callers can learn an ephemeral port.
class RenderServer {
 public:
  /// Throws IoError when the endpoint cannot be bound.
  explicit RenderServer(const Endpoint& listen);
  ~RenderServer();
  RenderServer(const RenderServer&) = delete;
  RenderServer& operator=(const RenderServer&) = delete;

  std::uint16_t port() const { return port_; }

  /// Serves a single client until end-of-stream, disconnect or a fatal packet.
  /// Receipt runs on its own thread; rendering runs on the calling thread and
  /// always takes the newest pose from a single-slot mailbox.
  SessionStats serve(const FrameRenderer& render, FrameSink& sink, const ServerOptions& opts = {});

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

/// Renders each pose with base_intr widened to the packet's field of view.
FrameRenderer scene_renderer(const Scene& scene, const RenderConfig& base);

SessionStats run_render_server(const Endpoint& listen, const Scene& scene, const RenderConfig& base, FrameSink& sink,
                               const ServerOptions& opts = {});

struct TimedPose {
  std::int64_t timestamp_us = 0;
  Pose pose;
};

struct ClientOptions {
  /// Fixed send rate; when unset, packets follow the pose timestamps.
  std::optional<double> rate_hz;
  float fov_deg = static_cast<float>(kEnhancedHfovDeg);
  int connect_timeout_ms = 5000;
};

struct SendStats {
  std::size_t packets_sent = 0;
  double wall_seconds = 0;
  std::string error;  // empty on success
  bool ok() const { return error.empty(); }
};

/// Streams the poses with the end-of-stream flag on the last packet. Connection
/// and send failures are reported in SendStats together with partial progress.
SendStats run_pose_client(const Endpoint& server, std::span<const TimedPose> poses, const ClientOptions& opts = {});

}  // namespace stabilens
