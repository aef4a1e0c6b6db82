#pragma once

// Collision checking: the vehicle is a sphere of radius uav_size tested against
// the static map tree and a per-step tree over obstacle surface points.

#include "lidarsim/pointmap/kdtree.hpp"

#include <string_view>

namespace lidarsim {

enum class Offender { None, StaticMap, Obstacle };

inline std::string_view offender_name(Offender o) {
  switch (o) {
    case Offender::StaticMap: return "STATIC_MAP";
    case Offender::Obstacle: return "OBSTACLE";
    default: return "NONE";
  }
}

struct CollisionReport {
  bool colliding = false;
  double nearest_distance = kInf;
  Offender offender = Offender::None;  // set only when colliding
  Vec3 nearest_point = Vec3::Constant(kInf);
  Vec3 contact_point = Vec3::Constant(kInf);  // nearest point when colliding
};

/// Either tree may be null or empty. Collides iff nearest_distance <= uav_size.
/// On an exact distance tie the static map is reported.
inline CollisionReport check_collision(const KdIndex* map_tree, const KdIndex* obstacle_tree, const Vec3& position,
                                       double uav_size) {
  require_positive(uav_size, "uav_size");
  CollisionReport r;
  auto consider = [&](const KdIndex* tree, Offender who) {
    if (!tree || tree->empty()) return;
    const auto nb = tree->nearest(position);
    if (nb.distance < r.nearest_distance) {
      r.nearest_distance = nb.distance;
      r.offender = who;
      r.nearest_point = tree->points()[nb.index];
    }
  };
  consider(map_tree, Offender::StaticMap);
  consider(obstacle_tree, Offender::Obstacle);
  r.colliding = r.nearest_distance <= uav_size;
  if (r.colliding)
    r.contact_point = r.nearest_point;
  else
    r.offender = Offender::None;
  return r;
}

}  // namespace lidarsim
