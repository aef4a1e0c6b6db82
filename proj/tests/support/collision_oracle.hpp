#pragma once

// Random (world, pose) trials comparing check_collision with a linear scan.

#include "lidarsim/world/world_state.hpp"
#include "support/gen.hpp"

namespace testsupport {

struct CollisionTrialStats {
  std::size_t trials = 0;
  std::size_t flag_mismatches = 0;
  std::size_t offender_mismatches = 0;
  double max_distance_error = 0.0;
  std::size_t colliding = 0;
};

struct BruteCollision {
  bool colliding = false;
  double distance = lidarsim::kInf;
  lidarsim::Offender offender = lidarsim::Offender::None;
};

inline BruteCollision brute_collision(const lidarsim::PointList& map, const lidarsim::PointList& obstacles,
                                      const Vec3& pos, double size) {
  BruteCollision b;
  for (const auto& p : map) {
    const double d = (p - pos).norm();
    if (d < b.distance) {
      b.distance = d;
      b.offender = lidarsim::Offender::StaticMap;
    }
  }
  for (const auto& p : obstacles) {
    const double d = (p - pos).norm();
    if (d < b.distance) {
      b.distance = d;
      b.offender = lidarsim::Offender::Obstacle;
    }
  }
  b.colliding = b.distance <= size;
  if (!b.colliding) b.offender = lidarsim::Offender::None;
  return b;
}

/// Each trial draws a map cloud, an obstacle set stepped a few times, and a probe
/// position biased toward surfaces so both outcomes are well represented.
inline CollisionTrialStats run_collision_trials(std::size_t trials, std::uint64_t seed) {
  using namespace lidarsim;
  Gen g(seed);
  CollisionTrialStats st;
  for (std::size_t t = 0; t < trials; ++t) {
    const Vec3 lo(-5, -5, 0), hi(5, 5, 3);
    const PointList cloud = g.cloud(static_cast<std::size_t>(g.integer(0, 3000)), lo, hi);
    auto map = std::make_shared<const PointMap>(
        PointMap::from_parts(0.1, 2.0, cloud, std::vector<Vec3>(cloud.size(), Vec3::UnitZ()),
                             std::vector<double>(cloud.size(), kInf)));
    ObstacleConfig oc;
    oc.count = static_cast<std::size_t>(g.integer(0, 8));
    oc.bounds.min = lo;
    oc.bounds.max = hi;
    oc.spacing = g.uniform(0.05, 0.3);
    WorldState w = make_world(map, spawn_obstacles(oc, make_rng(seed, t)));
    for (int k = g.integer(0, 5); k > 0; --k) world_step(w, 0.1, {});
    const PointList obstacle_points = w.obstacles.surface_points();

    Vec3 pos = g.point_in(lo, hi);
    const PointList& near_set = g.coin() && !cloud.empty() ? cloud : obstacle_points;
    if (!near_set.empty() && g.coin(0.7))
      pos = near_set[static_cast<std::size_t>(g.integer(0, static_cast<int>(near_set.size()) - 1))] +
            g.unit() * g.uniform(0.0, 0.6);
    const double size = g.uniform(0.05, 0.6);

    const auto got = w.check_collision(pos, size);
    const auto want = brute_collision(cloud, obstacle_points, pos, size);
    ++st.trials;
    st.colliding += want.colliding;
    st.flag_mismatches += got.colliding != want.colliding;
    st.offender_mismatches += got.offender != want.offender;
    if (want.distance == kInf || got.nearest_distance == kInf) {
      if (want.distance != got.nearest_distance) st.max_distance_error = kInf;
    } else {
      st.max_distance_error = std::max(st.max_distance_error, std::abs(got.nearest_distance - want.distance));
    }
  }
  return st;
}

}  // namespace testsupport
