#pragma once

// Peer vehicles: pose records exchanged between simulator instances and the
// cube of points each one contributes to the other vehicles' scans.

#include "lidarsim/renderer/pose.hpp"

#include <map>
#include <mutex>

namespace lidarsim {

inline constexpr double kPeerStaleSeconds = 0.5;

struct PeerPose {
  std::uint32_t id = 0;
  Pose pose;
  double size = 0.3;       // cube edge, m
  double timestamp = 0.0;  // sender clock, s
};

/// Lattice points on the six faces of a cube of edge peer.size, in the map frame.
/// Each edge holds ceil(size / spacing) + 1 samples, so corners are always present.
inline PointList sample_uav_surface(const PeerPose& peer, double spacing) {
  require_positive(spacing, "spacing");
  require_positive(peer.size, "size");
  const int n = std::max(1, static_cast<int>(std::ceil(peer.size / spacing - 1e-9)));
  const double h = peer.size / 2.0;
  const double step = peer.size / n;
  PointList out;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k) {
        if (i != 0 && i != n && j != 0 && j != n && k != 0 && k != n) continue;
        const Vec3 local(-h + i * step, -h + j * step, -h + k * step);
        out.push_back(peer.pose.to_map(local));
      }
  return out;
}

/// Latest-wins staging area for peer poses arriving from the network. A pose is
/// accepted only if its timestamp is newer than the stored one for that id.
class PeerMailbox {
public:
  /// Returns false when the pose is older than (or as old as) the stored one.
  bool offer(const PeerPose& p) {
    std::lock_guard lock(mu_);
    auto it = latest_.find(p.id);
    if (it != latest_.end() && p.timestamp <= it->second.pose.timestamp) return false;
    latest_[p.id] = {p, clock_};
    return true;
  }

  /// Advances the local clock used for staleness.
  void set_local_time(double t) {
    std::lock_guard lock(mu_);
    clock_ = t;
  }

  /// Peers refreshed within kPeerStaleSeconds of `now` (local clock), ordered by id.
  std::vector<PeerPose> fresh(double now, double max_age = kPeerStaleSeconds) const {
    std::lock_guard lock(mu_);
    std::vector<PeerPose> out;
    for (const auto& [id, e] : latest_)
      if (now - e.received <= max_age) out.push_back(e.pose);
    return out;
  }

  std::optional<PeerPose> get(std::uint32_t id) const {
    std::lock_guard lock(mu_);
    auto it = latest_.find(id);
    if (it == latest_.end()) return std::nullopt;
    return it->second.pose;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return latest_.size();
  }

private:
  struct Entry {
    PeerPose pose;
    double received = 0.0;
  };
  mutable std::mutex mu_;
  std::map<std::uint32_t, Entry> latest_;
  double clock_ = 0.0;
};

}  // namespace lidarsim
