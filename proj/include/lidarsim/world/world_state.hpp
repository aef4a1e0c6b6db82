#pragma once

#include "lidarsim/renderer/render.hpp"
#include "lidarsim/world/collision.hpp"
#include "lidarsim/world/obstacles.hpp"
#include "lidarsim/world/peers.hpp"

namespace lidarsim {

/// Static map plus everything that moves. The map is shared and never modified;
/// obstacles and peers reach the renderer through `overlay`.
struct WorldState {
  std::shared_ptr<const PointMap> map;
  ObstacleSet obstacles;
  std::shared_ptr<const KdIndex> obstacle_tree;
  std::vector<PeerPose> peers;
  Overlay overlay;
  double time = 0.0;

  double resolution() const { return map ? map->resolution() : overlay.resolution; }

  CollisionReport check_collision(const Vec3& position, double uav_size) const {
    return lidarsim::check_collision(map ? map->tree() : nullptr, obstacle_tree.get(), position, uav_size);
  }
};

namespace detail {

inline void refresh_world_derived(WorldState& w) {
  PointList obstacle_points = w.obstacles.surface_points();
  w.obstacle_tree = obstacle_points.empty() ? nullptr : std::make_shared<const KdIndex>(obstacle_points);
  w.overlay.resolution = w.resolution();
  w.overlay.points = std::move(obstacle_points);
  for (const auto& p : w.peers) {
    const auto cube = sample_uav_surface(p, w.overlay.resolution);
    w.overlay.points.insert(w.overlay.points.end(), cube.begin(), cube.end());
  }
}

}  // namespace detail

inline WorldState make_world(std::shared_ptr<const PointMap> map, ObstacleSet obstacles) {
  WorldState w;
  w.map = std::move(map);
  w.obstacles = std::move(obstacles);
  detail::refresh_world_derived(w);
  return w;
}

/// Advances the clock and obstacles by dt, adopts `peers` as the visible peer
/// set, and rebuilds the obstacle tree and render overlay. `vehicles` are the
/// positions obstacle respawns must keep clear of.
inline void world_step(WorldState& w, double dt, std::vector<PeerPose> peers, std::span<const Vec3> vehicles = {}) {
  require_positive(dt, "dt");
  w.time += dt;
  if (!w.obstacles.empty()) step_obstacles(w.obstacles, dt, vehicles);
  w.peers = std::move(peers);
  detail::refresh_world_derived(w);
}

inline ScanCloud render_scan(const WorldState& w, const ScanRenderer& renderer, const Pose& sensor_pose) {
  static const PointMap kEmpty;
  return renderer.render_scan(w.map ? *w.map : kEmpty, &w.overlay, sensor_pose, w.time);
}

}  // namespace lidarsim
