#pragma once

// Spherical dynamic obstacles moving at constant velocity inside the map box.

#include "lidarsim/pointmap/point_map.hpp"
#include "lidarsim/sensors/noise.hpp"

namespace lidarsim {

struct ObstacleConfig {
  std::size_t count = 0;
  double radius_min = 0.2, radius_max = 0.5;  // m
  double speed_min = 0.5, speed_max = 1.5;    // m/s
  AxisBox bounds;
  double spacing = 0.1;  // surface sampling, normally r_map
  double keep_out = 0.0; // respawn rejection distance around vehicles, m

  void validate() const {
    require_positive(radius_min, "obstacles.radius_min");
    if (!(speed_min >= 0.0)) throw ParameterError("obstacles.speed_min", "must be >= 0");
    require_positive(spacing, "obstacles.spacing");
    if (radius_max < radius_min) throw ParameterError("obstacles.radius_max", "must be >= radius_min");
    if (speed_max < speed_min) throw ParameterError("obstacles.speed_max", "must be >= speed_min");
    if (count > 0 && !((bounds.max.array() > bounds.min.array()).all() && all_finite(bounds.min) &&
                       all_finite(bounds.max)))
      throw ParameterError("obstacles.bounds", "bounds must have positive extent on every axis");
  }
};

/// Roughly area/spacing^2 points on a sphere (Fibonacci lattice), at least 12.
inline PointList sphere_surface_points(const Vec3& center, double radius, double spacing) {
  require_positive(radius, "radius");
  require_positive(spacing, "spacing");
  const auto n = std::max<std::size_t>(12, static_cast<std::size_t>(std::ceil(4.0 * kPi * radius * radius /
                                                                                (spacing * spacing))));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  PointList out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.push_back(center + radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z));
  }
  return out;
}

struct Obstacle {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
  Vec3 velocity = Vec3::Zero();
  PointList surface_points;

  void translate(const Vec3& d) {
    center += d;
    for (auto& p : surface_points) p += d;
  }
};

struct ObstacleSet {
  std::vector<Obstacle> obstacles;
  ObstacleConfig config;
  Rng rng;
  std::size_t respawns = 0;

  std::size_t size() const { return obstacles.size(); }
  bool empty() const { return obstacles.empty(); }

  PointList surface_points() const {
    PointList out;
    for (const auto& o : obstacles) out.insert(out.end(), o.surface_points.begin(), o.surface_points.end());
    return out;
  }
};

inline Vec3 random_unit_vector(Rng& rng) {
  for (;;) {
    const Vec3 v(standard_normal(rng), standard_normal(rng), standard_normal(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

inline Vec3 random_point_in(const AxisBox& b, Rng& rng) {
  Vec3 p;
  for (int a = 0; a < 3; ++a) p[a] = uniform(rng, b.min[a], b.max[a]);
  return p;
}

namespace detail {

inline constexpr int kRespawnAttempts = 1000;

inline Obstacle draw_obstacle(const ObstacleConfig& cfg, Rng& rng, std::span<const Vec3> avoid) {
  Vec3 center = random_point_in(cfg.bounds, rng);
  for (int attempt = 1; attempt < kRespawnAttempts && cfg.keep_out > 0.0; ++attempt) {
    const bool clear = std::none_of(avoid.begin(), avoid.end(),
                                    [&](const Vec3& u) { return (u - center).norm() < cfg.keep_out; });
    if (clear) break;
    center = random_point_in(cfg.bounds, rng);
  }
  Obstacle o;
  o.center = center;
  o.radius = uniform(rng, cfg.radius_min, cfg.radius_max);
  o.velocity = random_unit_vector(rng) * uniform(rng, cfg.speed_min, cfg.speed_max);
  o.surface_points = sphere_surface_points(o.center, o.radius, cfg.spacing);
  return o;
}

}  // namespace detail

/// Seeded obstacle set; `avoid` holds vehicle positions kept clear by cfg.keep_out.
inline ObstacleSet spawn_obstacles(const ObstacleConfig& cfg, Rng rng, std::span<const Vec3> avoid = {}) {
  cfg.validate();
  ObstacleSet set;
  set.config = cfg;
  set.obstacles.reserve(cfg.count);
  for (std::size_t i = 0; i < cfg.count; ++i) set.obstacles.push_back(detail::draw_obstacle(cfg, rng, avoid));
  set.rng = rng;
  return set;
}

/// Moves every obstacle by velocity * dt. Any center that leaves the bounds is
/// replaced in place by a fresh draw, so the count never changes.
inline void step_obstacles(ObstacleSet& set, double dt, std::span<const Vec3> avoid = {}) {
  require_positive(dt, "dt");
  for (auto& o : set.obstacles) {
    o.translate(o.velocity * dt);
    if (!set.config.bounds.contains(o.center)) {
      o = detail::draw_obstacle(set.config, set.rng, avoid);
      ++set.respawns;
    }
  }
}

}  // namespace lidarsim
