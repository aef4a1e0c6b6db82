#pragma once

// POSIX sockets for the planner endpoint (TCP, JSON lines) and peer pose
// exchange (UDP datagrams, one JSON line each).

#include "lidarsim/sim/simulation.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

namespace lidarsim {

class NetError : public Error {
public:
  using Error::Error;
};

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

inline HostPort parse_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon + 1 >= s.size()) throw NetError("expected host:port, got '" + s + "'");
  HostPort hp;
  hp.host = s.substr(0, colon);
  if (hp.host.empty()) hp.host = "0.0.0.0";
  const auto port = std::strtol(s.c_str() + colon + 1, nullptr, 10);
  if (port < 0 || port > 65535) throw NetError("port out of range in '" + s + "'");
  hp.port = static_cast<std::uint16_t>(port);
  return hp;
}

inline sockaddr_in resolve_ipv4(const HostPort& hp) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(hp.port);
  if (inet_pton(AF_INET, hp.host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{}, *res = nullptr;
  hints.ai_family = AF_INET;
  if (getaddrinfo(hp.host.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw NetError("cannot resolve host '" + hp.host + "'");
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

/// Owning file descriptor.
class Socket {
public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { reset(); }

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

private:
  int fd_ = -1;
};

inline std::uint16_t local_port(const Socket& s) {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) throw NetError("getsockname failed");
  return ntohs(addr.sin_port);
}

inline Socket bind_socket(int type, const HostPort& hp) {
  Socket s(::socket(AF_INET, type | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw NetError(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  const auto addr = resolve_ipv4(hp);
  if (::bind(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw NetError("bind " + hp.host + ":" + std::to_string(hp.port) + ": " + std::strerror(errno));
  return s;
}

inline Socket tcp_listen(const HostPort& hp) {
  Socket s = bind_socket(SOCK_STREAM, hp);
  if (::listen(s.fd(), 4) != 0) throw NetError(std::string("listen: ") + std::strerror(errno));
  return s;
}

inline Socket tcp_connect(const HostPort& hp) {
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) throw NetError(std::string("socket: ") + std::strerror(errno));
  const auto addr = resolve_ipv4(hp);
  if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
    throw NetError("connect " + hp.host + ":" + std::to_string(hp.port) + ": " + std::strerror(errno));
  const int one = 1;
  setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return s;
}

inline bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const auto n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        pollfd p{fd, POLLOUT, 0};
        ::poll(&p, 1, 100);
        continue;
      }
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Splits a byte stream into lines.
class LineBuffer {
public:
  void append(const char* data, std::size_t n) { buf_.append(data, n); }
  bool next(std::string& line) {
    const auto nl = buf_.find('\n');
    if (nl == std::string::npos) return false;
    line.assign(buf_, 0, nl);
    buf_.erase(0, nl + 1);
    return true;
  }

private:
  std::string buf_;
};

/// Blocking line-oriented TCP client, used by tests and simple planners.
class LineClient {
public:
  explicit LineClient(const HostPort& hp) : sock_(tcp_connect(hp)) {}

  bool send_line(std::string_view line) {
    std::string s(line);
    if (s.empty() || s.back() != '\n') s += '\n';
    return send_all(sock_.fd(), s);
  }

  /// Next line, or nullopt on timeout or disconnect.
  std::optional<std::string> read_line(int timeout_ms = 1000) {
    std::string line;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (!buf_.next(line)) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{sock_.fd(), POLLIN, 0};
      if (::poll(&p, 1, static_cast<int>(left.count())) <= 0) continue;
      char chunk[65536];
      const auto n = ::recv(sock_.fd(), chunk, sizeof chunk, 0);
      if (n <= 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
    return line;
  }

  void close() { sock_.reset(); }

private:
  Socket sock_;
  LineBuffer buf_;
};

// ---------------------------------------------------------------------------
// Peer pose exchange

struct PeerSyncStats {
  std::size_t sent = 0;
  std::size_t received = 0;
  std::size_t dropped = 0;    // simulated loss
  std::size_t rejected = 0;   // older than the stored pose, or own id
  std::size_t malformed = 0;
};

/// Broadcasts this vehicle's pose to the configured peers and stages received
/// poses in a latest-wins mailbox. Inbound datagrams are dropped with
/// probability network.peer_drop_rate to exercise loss handling.
class PeerSync {
public:
  PeerSync(const SimConfig& cfg, std::uint32_t own_id)
      : own_id_(own_id), drop_rate_(cfg.peer_drop_rate), rng_(make_rng(cfg.seed, 0x9eefull + own_id)) {
    for (const auto& p : cfg.peers) targets_.push_back(resolve_ipv4(parse_host_port(p)));
    if (cfg.peer_bind.empty()) return;
    sock_ = bind_socket(SOCK_DGRAM, parse_host_port(cfg.peer_bind));
    thread_ = std::thread([this] { receive_loop(); });
  }
  PeerSync(const PeerSync&) = delete;
  PeerSync& operator=(const PeerSync&) = delete;
  ~PeerSync() {
    quit_ = true;
    if (thread_.joinable()) thread_.join();
  }

  bool active() const { return sock_.valid(); }
  std::uint16_t port() const { return active() ? local_port(sock_) : 0; }
  PeerMailbox& mailbox() { return mailbox_; }

  void add_target(const HostPort& hp) { targets_.push_back(resolve_ipv4(hp)); }

  void broadcast(const PeerPose& pose) {
    if (!active() || targets_.empty()) return;
    const std::string line = encode_wire(make_peer_pose(pose));
    for (const auto& addr : targets_) {
      if (::sendto(sock_.fd(), line.data(), line.size(), 0, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) ==
          static_cast<ssize_t>(line.size())) {
        std::lock_guard lock(stats_mu_);
        ++stats_.sent;
      }
    }
  }

  PeerSyncStats stats() const {
    std::lock_guard lock(stats_mu_);
    return stats_;
  }

private:
  void receive_loop() {
    char buf[2048];
    while (!quit_.load()) {
      pollfd p{sock_.fd(), POLLIN, 0};
      if (::poll(&p, 1, 5) <= 0) continue;
      const auto n = ::recv(sock_.fd(), buf, sizeof buf, MSG_DONTWAIT);
      if (n <= 0) continue;
      std::lock_guard lock(stats_mu_);
      ++stats_.received;
      if (drop_rate_ > 0.0 && uniform01(rng_) < drop_rate_) {
        ++stats_.dropped;
        continue;
      }
      try {
        const auto msg = parse_wire(std::string_view(buf, static_cast<std::size_t>(n)));
        const auto* pp = std::get_if<PeerPoseMsg>(&msg);
        if (!pp) {
          ++stats_.malformed;
          continue;
        }
        if (pp->id == own_id_ || !mailbox_.offer(to_peer_pose(*pp))) ++stats_.rejected;
      } catch (const ParseError&) {
        ++stats_.malformed;
      }
    }
  }

  std::uint32_t own_id_;
  double drop_rate_;
  Rng rng_;
  std::vector<sockaddr_in> targets_;
  Socket sock_;
  PeerMailbox mailbox_;
  std::atomic<bool> quit_{false};
  mutable std::mutex stats_mu_;
  PeerSyncStats stats_;
  std::thread thread_;
};

/// Wires a PeerSync into a simulation: staged peers feed world steps and the
/// own pose is broadcast at the odometry rate. Returns the per-tick events.
inline TickEvents step_with_peers(Simulation& sim, PeerSync& sync) {
  sim.set_peer_mailbox(&sync.mailbox());
  const auto ev = sim.step();
  if (ev.odom) sync.broadcast(sim.own_pose());
  return ev;
}

// ---------------------------------------------------------------------------
// Planner endpoint

struct ServeOptions {
  double duration = kInf;                     // simulated seconds; inf = until stop
  const std::atomic<bool>* stop = nullptr;    // set to end the loop
  std::function<void(std::uint16_t)> on_listen;  // reports the bound port
  std::size_t max_queue_bytes = 64u << 20;    // outgoing backlog before messages are dropped
  PeerSync* peers = nullptr;                  // optional peer exchange
  bool stop_on_collision = false;
};

struct ServeStats {
  std::size_t connections = 0;
  std::size_t setpoints = 0;
  std::size_t malformed = 0;
  std::size_t sent_messages = 0;
  std::size_t dropped_messages = 0;
  std::vector<CollisionEvent> collisions;
  double sim_time = 0.0;
};

namespace detail {

/// Shared between the simulation loop and the network thread.
struct EndpointChannel {
  std::mutex mu;
  std::optional<SetpointMsg> setpoint;  // latest wins
  std::deque<std::string> outgoing;
  std::size_t outgoing_bytes = 0;
  bool connected = false;
  ServeStats stats;
};

inline void endpoint_io(Socket listener, EndpointChannel& ch, const std::atomic<bool>& quit) {
  Socket client;
  LineBuffer in;
  while (!quit.load()) {
    pollfd fds[2] = {{listener.fd(), POLLIN, 0}, {client.valid() ? client.fd() : -1, POLLIN, 0}};
    ::poll(fds, 2, 2);
    if (fds[0].revents & POLLIN) {
      Socket s(::accept4(listener.fd(), nullptr, nullptr, SOCK_CLOEXEC));
      if (s.valid()) {
        if (client.valid()) {
          // One control client at a time; a second connection is refused.
          send_all(s.fd(), encode_wire(ErrorMsg{0.0, "another client is connected"}));
        } else {
          const int one = 1;
          setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
          client = std::move(s);
          in = LineBuffer{};
          std::lock_guard lock(ch.mu);
          ch.connected = true;
          ch.outgoing.clear();
          ch.outgoing_bytes = 0;
          ++ch.stats.connections;
        }
      }
    }
    bool lost = false;
    if (client.valid() && (fds[1].revents & (POLLIN | POLLHUP | POLLERR))) {
      char chunk[65536];
      const auto n = ::recv(client.fd(), chunk, sizeof chunk, MSG_DONTWAIT);
      if (n <= 0) {
        if (n == 0 || (errno != EAGAIN && errno != EINTR)) lost = true;
      } else {
        in.append(chunk, static_cast<std::size_t>(n));
        std::string line;
        while (in.next(line)) {
          if (trim(line).empty()) continue;
          std::lock_guard lock(ch.mu);
          try {
            const auto msg = parse_wire(line);
            if (const auto* sp = std::get_if<SetpointMsg>(&msg)) {
              ch.setpoint = *sp;
              ++ch.stats.setpoints;
            }
          } catch (const ParseError& e) {
            ++ch.stats.malformed;
            const std::string reply = encode_wire(ErrorMsg{ch.stats.sim_time, e.what()});
            ch.outgoing.push_back(reply);
            ch.outgoing_bytes += reply.size();
          }
        }
      }
    }
    if (client.valid() && !lost) {
      std::deque<std::string> batch;
      {
        std::lock_guard lock(ch.mu);
        batch.swap(ch.outgoing);
        ch.outgoing_bytes = 0;
      }
      std::string joined;
      for (auto& s : batch) joined += s;
      if (!joined.empty() && !send_all(client.fd(), joined)) lost = true;
      std::lock_guard lock(ch.mu);
      ch.stats.sent_messages += batch.size();
    }
    if (lost) {
      client.reset();
      std::lock_guard lock(ch.mu);
      ch.connected = false;
    }
  }
}

}  // namespace detail

/// Runs `sim` behind a TCP endpoint at config.network.bind. Emits odom, imu,
/// scan and collision lines to the connected client and applies the latest
/// "setpoint" line at each tick. A disconnect keeps the simulation running on
/// the last setpoint and a new client may connect. realtime_factor paces the
/// simulated clock against the wall clock (0 = unpaced).
inline ServeStats serve_endpoint(Simulation& sim, const ServeOptions& opt = {}) {
  const auto& cfg = sim.config();
  Socket listener = tcp_listen(parse_host_port(cfg.bind));
  const std::uint16_t port = local_port(listener);
  if (opt.on_listen) opt.on_listen(port);

  detail::EndpointChannel ch;
  std::atomic<bool> quit{false};
  std::thread io(detail::endpoint_io, std::move(listener), std::ref(ch), std::cref(quit));

  sim.set_sink([&](const WireMessage& m) {
    std::lock_guard lock(ch.mu);
    if (!ch.connected) return;
    std::string line = encode_wire(m);
    if (ch.outgoing_bytes + line.size() > opt.max_queue_bytes) {
      ++ch.stats.dropped_messages;
      return;
    }
    ch.outgoing_bytes += line.size();
    ch.outgoing.push_back(std::move(line));
  });

  const auto wall0 = std::chrono::steady_clock::now();
  const double sim0 = sim.time();
  std::vector<CollisionEvent> collisions;
  while (sim.time() - sim0 < opt.duration && !(opt.stop && opt.stop->load())) {
    {
      std::lock_guard lock(ch.mu);
      if (ch.setpoint) {
        sim.set_setpoint({ch.setpoint->p, ch.setpoint->yaw});
        ch.setpoint.reset();
      }
      ch.stats.sim_time = sim.time();
    }
    const auto ev = opt.peers ? step_with_peers(sim, *opt.peers) : sim.step();
    if (ev.collision) {
      collisions.push_back({sim.time(), ev.collision->offender, ev.collision->nearest_distance, sim.state().position});
      if (opt.stop_on_collision) break;
    }
    if (cfg.realtime_factor > 0.0) {
      const auto target = wall0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                      std::chrono::duration<double>((sim.time() - sim0) / cfg.realtime_factor));
      std::this_thread::sleep_until(target);
    }
  }
  // Let the network thread flush what is queued.
  for (int i = 0; i < 200; ++i) {
    {
      std::lock_guard lock(ch.mu);
      if (ch.outgoing.empty() || !ch.connected) break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  quit = true;
  io.join();
  sim.set_sink({});
  ServeStats stats = ch.stats;
  stats.collisions = std::move(collisions);
  stats.sim_time = sim.time();
  return stats;
}

}  // namespace lidarsim
