#include "stabilens/pose_stream.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <ostream>
#include <thread>

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>
#include <zlib.h>

namespace stabilens {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint8_t kMagic[4] = {'H', 'L', 'P', 'S'};
constexpr std::size_t kCrcOffset = 74;

void put_u32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}
std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

struct Fd {
  int fd = -1;
  explicit Fd(int f = -1) : fd(f) {}
  Fd(Fd&& o) noexcept : fd(std::exchange(o.fd, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd = std::exchange(o.fd, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

struct AddrInfo {
  addrinfo* head = nullptr;
  ~AddrInfo() {
    if (head) freeaddrinfo(head);
  }
};

void resolve(const Endpoint& ep, bool passive, AddrInfo& out) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  const std::string port = std::to_string(ep.port);
  const int rc = getaddrinfo(ep.host.empty() ? nullptr : ep.host.c_str(), port.c_str(), &hints, &out.head);
  if (rc != 0) throw IoError("cannot resolve " + ep.str() + ": " + gai_strerror(rc));
}

// 1 = full packet, 0 = clean EOF before any byte, -1 = EOF or error mid-packet.
int read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) return got == 0 ? 0 : -1;
    if (r < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    got += static_cast<std::size_t>(r);
  }
  return 1;
}

bool send_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

double percentile_nearest_rank(std::vector<double> v, double pct) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

Pose PosePacket::to_pose() const {
  Mat3 r;
  Vec3 t;
  for (int row = 0; row < 3; ++row) {
    for (int c = 0; c < 3; ++c) r(row, c) = pose[row * 4 + c];
    t(row) = pose[row * 4 + 3];
  }
  return Pose::nearest(r, t);
}

std::uint32_t crc32_ieee(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

PacketBytes encode_pose_packet(std::uint32_t sequence, std::uint64_t timestamp_us, const Pose& pose, float fov_deg,
                               std::uint8_t flags) {
  if (!(fov_deg > 0 && fov_deg < 180)) throw InvalidInput("pose packet: fov_deg must be in (0, 180)");
  PacketBytes b{};
  std::memcpy(b.data(), kMagic, 4);
  b[4] = kPoseProtocolVersion;
  b[5] = flags;
  put_u32(&b[6], sequence);
  put_u64(&b[10], timestamp_us);
  for (int row = 0; row < 3; ++row)
    for (int c = 0; c < 4; ++c) {
      const double v = c < 3 ? pose.rotation()(row, c) : pose.translation()(row);
      put_u32(&b[18 + 4 * (row * 4 + c)], std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  put_u32(&b[66], std::bit_cast<std::uint32_t>(fov_deg));
  put_u32(&b[70], 0);
  put_u32(&b[kCrcOffset], crc32_ieee(std::span(b.data(), kCrcOffset)));
  return b;
}

PosePacket decode_pose_packet(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPosePacketSize)
    throw ProtocolError("pose packet: need 78 bytes, got " + std::to_string(bytes.size()));
  const std::uint8_t* b = bytes.data();
  if (std::memcmp(b, kMagic, 4) != 0) throw ProtocolError("pose packet: bad magic");
  if (b[4] != kPoseProtocolVersion) throw ProtocolError("pose packet: unsupported version " + std::to_string(b[4]));
  if (get_u32(b + kCrcOffset) != crc32_ieee(bytes.first(kCrcOffset))) throw IntegrityError("pose packet: CRC mismatch");
  PosePacket p;
  p.version = b[4];
  p.flags = b[5];
  p.sequence = get_u32(b + 6);
  p.timestamp_us = get_u64(b + 10);
  for (int i = 0; i < 12; ++i) p.pose[i] = std::bit_cast<float>(get_u32(b + 18 + 4 * i));
  p.fov_deg = std::bit_cast<float>(get_u32(b + 66));
  for (float v : p.pose)
    if (!std::isfinite(v)) throw SemanticError("pose packet " + std::to_string(p.sequence) + ": non-finite pose");
  if (!(p.fov_deg > 0 && p.fov_deg < 180))
    throw SemanticError("pose packet " + std::to_string(p.sequence) + ": fov out of range");
  Mat3 r;
  for (int row = 0; row < 3; ++row)
    for (int c = 0; c < 3; ++c) r(row, c) = p.pose[row * 4 + c];
  if (Pose::orthonormality_error(r) > 1e-3 || std::abs(r.determinant() - 1) > 1e-3)
    throw SemanticError("pose packet " + std::to_string(p.sequence) + ": rotation not orthonormal");
  return p;
}

Endpoint Endpoint::parse(const std::string& text) {
  Endpoint ep;
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) {
    if (!text.empty()) ep.host = text;
    return ep;
  }
  if (colon > 0) ep.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  try {
    std::size_t used = 0;
    const int v = std::stoi(port, &used);
    if (used != port.size() || v < 0 || v > 65535) throw std::out_of_range(port);
    ep.port = static_cast<std::uint16_t>(v);
  } catch (const std::exception&) {
    throw InvalidInput("bad endpoint port in '" + text + "'");
  }
  return ep;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

PngDirectorySink::PngDirectorySink(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
}

void PngDirectorySink::write(std::uint32_t sequence, const RgbImage& frame) {
  write_png_rgb(dir_ / (std::to_string(sequence) + ".png"), frame);
}

void RawStreamSink::write(std::uint32_t sequence, const RgbImage& frame) {
  std::uint8_t header[12];
  put_u32(header, sequence);
  put_u32(header + 4, static_cast<std::uint32_t>(frame.width()));
  put_u32(header + 8, static_cast<std::uint32_t>(frame.height()));
  out_.write(reinterpret_cast<const char*>(header), sizeof header);
  out_.write(reinterpret_cast<const char*>(frame.pixels().data()), static_cast<std::streamsize>(frame.size()));
  out_.flush();
  if (!out_) throw IoError("frame stream write failed");
}

RenderServer::RenderServer(const Endpoint& listen) {
  AddrInfo ai;
  resolve(listen, true, ai);
  std::string last_error = "no address";
  for (addrinfo* a = ai.head; a; a = a->ai_next) {
    Fd s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
    if (s.fd < 0) continue;
    const int one = 1;
    ::setsockopt(s.fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd, a->ai_addr, a->ai_addrlen) != 0 || ::listen(s.fd, 1) != 0) {
      last_error = std::strerror(errno);
      continue;
    }
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.fd, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port
                                               : reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    fd_ = std::exchange(s.fd, -1);
    return;
  }
  throw IoError("cannot listen on " + listen.str() + ": " + last_error);
}

RenderServer::~RenderServer() {
  if (fd_ >= 0) ::close(fd_);
}

SessionStats RenderServer::serve(const FrameRenderer& render, FrameSink& sink, const ServerOptions& opts) {
  SessionStats stats;
  pollfd pfd{fd_, POLLIN, 0};
  const int ready = ::poll(&pfd, 1, opts.accept_timeout_ms);
  if (ready <= 0) {
    stats.aborted = true;
    stats.diagnostic = ready == 0 ? "no client connected before timeout" : std::strerror(errno);
    return stats;
  }
  Fd client(::accept(fd_, nullptr, nullptr));
  if (client.fd < 0) {
    stats.aborted = true;
    stats.diagnostic = std::string("accept failed: ") + std::strerror(errno);
    return stats;
  }

  struct Slot {
    PosePacket packet;
    Clock::time_point arrival;
  };
  std::mutex mu;
  std::condition_variable cv;
  std::optional<Slot> mailbox;
  bool done = false;

  std::jthread receiver([&] {
    PacketBytes buf;
    for (;;) {
      const int r = read_exact(client.fd, buf.data(), buf.size());
      const auto arrival = Clock::now();
      if (r <= 0) {
        std::lock_guard lock(mu);
        if (r < 0 && !done) {
          stats.aborted = true;
          stats.diagnostic = "connection lost mid-packet after " + std::to_string(stats.poses_received) + " poses";
        }
        done = true;
        cv.notify_all();
        return;
      }
      try {
        PosePacket p = decode_pose_packet(buf);
        std::lock_guard lock(mu);
        if (done) return;
        ++stats.poses_received;
        if (mailbox) ++stats.poses_dropped;
        mailbox = Slot{p, arrival};
        if (p.end_of_stream()) {
          stats.end_of_stream = true;
          done = true;
        }
        cv.notify_all();
        if (done) return;
      } catch (const SemanticError&) {
        std::lock_guard lock(mu);
        ++stats.packets_rejected;
      } catch (const ProtocolError& e) {
        std::lock_guard lock(mu);
        stats.aborted = true;
        stats.diagnostic = std::string(e.what()) + " after " + std::to_string(stats.poses_received) + " poses";
        done = true;
        cv.notify_all();
        return;
      }
    }
  });

  std::vector<double> latencies;
  for (;;) {
    Slot job;
    {
      std::unique_lock lock(mu);
      cv.wait(lock, [&] { return mailbox.has_value() || done; });
      if (stats.aborted) {
        if (mailbox) ++stats.poses_dropped;
        mailbox.reset();
        break;
      }
      if (!mailbox) break;
      job = *std::exchange(mailbox, std::nullopt);
    }
    try {
      sink.write(job.packet.sequence, render(job.packet));
    } catch (const std::exception& e) {
      std::lock_guard lock(mu);
      stats.aborted = true;
      stats.diagnostic = std::string("render failed: ") + e.what();
      done = true;
      ::shutdown(client.fd, SHUT_RDWR);
      break;
    }
    latencies.push_back(std::chrono::duration<double, std::milli>(Clock::now() - job.arrival).count());
    std::lock_guard lock(mu);
    ++stats.frames_rendered;
    stats.rendered_sequences.push_back(job.packet.sequence);
  }
  receiver.join();

  std::lock_guard lock(mu);
  if (mailbox) {
    ++stats.poses_dropped;
    mailbox.reset();
  }
  if (!latencies.empty()) {
    double sum = 0;
    for (double l : latencies) sum += l;
    stats.mean_latency_ms = sum / static_cast<double>(latencies.size());
    stats.p99_latency_ms = percentile_nearest_rank(latencies, 99);
  }
  return stats;
}

FrameRenderer scene_renderer(const Scene& scene, const RenderConfig& base) {
  base.validate();
  return [&scene, base](const PosePacket& p) {
    RenderConfig cfg = base;
    cfg.intr = intrinsics_for_fov(base.intr, p.fov_deg);
    return render_scene(scene, p.to_pose(), cfg).color;
  };
}

SessionStats run_render_server(const Endpoint& listen, const Scene& scene, const RenderConfig& base, FrameSink& sink,
                               const ServerOptions& opts) {
  RenderServer server(listen);
  return server.serve(scene_renderer(scene, base), sink, opts);
}

SendStats run_pose_client(const Endpoint& server, std::span<const TimedPose> poses, const ClientOptions& opts) {
  if (poses.empty()) throw InvalidInput("pose client: no poses to send");
  if (opts.rate_hz && !(*opts.rate_hz > 0)) throw InvalidInput("pose client: rate must be positive");
  if (!(opts.fov_deg > 0 && opts.fov_deg < 180)) throw InvalidInput("pose client: fov_deg must be in (0, 180)");
  SendStats stats;
  Fd sock;
  const auto deadline = Clock::now() + std::chrono::milliseconds(opts.connect_timeout_ms);
  std::string last_error;
  while (sock.fd < 0) {
    AddrInfo ai;
    try {
      resolve(server, false, ai);
    } catch (const IoError& e) {
      stats.error = e.what();
      return stats;
    }
    for (addrinfo* a = ai.head; a && sock.fd < 0; a = a->ai_next) {
      Fd s(::socket(a->ai_family, a->ai_socktype, a->ai_protocol));
      if (s.fd < 0) continue;
      if (::connect(s.fd, a->ai_addr, a->ai_addrlen) == 0)
        sock = std::move(s);
      else
        last_error = std::strerror(errno);
    }
    if (sock.fd >= 0) break;
    if (Clock::now() >= deadline) {
      stats.error = "cannot connect to " + server.str() + ": " + last_error;
      return stats;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  const int one = 1;
  ::setsockopt(sock.fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);

  const auto start = Clock::now();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const auto offset_us = opts.rate_hz ? static_cast<std::int64_t>(std::llround(1e6 * static_cast<double>(i) / *opts.rate_hz))
                                        : poses[i].timestamp_us - poses[0].timestamp_us;
    std::this_thread::sleep_until(start + std::chrono::microseconds(offset_us));
    const std::uint8_t flags = i + 1 == poses.size() ? kFlagEndOfStream : 0;
    const PacketBytes b = encode_pose_packet(static_cast<std::uint32_t>(i),
                                             static_cast<std::uint64_t>(std::max<std::int64_t>(0, poses[i].timestamp_us)),
                                             poses[i].pose, opts.fov_deg, flags);
    if (!send_all(sock.fd, b.data(), b.size())) {
      stats.error = "send failed after " + std::to_string(stats.packets_sent) + " of " + std::to_string(poses.size()) +
                    " packets: " + std::strerror(errno);
      break;
    }
    ++stats.packets_sent;
  }
  stats.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return stats;
}

}  // namespace stabilens
