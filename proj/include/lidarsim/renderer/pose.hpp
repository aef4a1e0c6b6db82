#pragma once

#include "lidarsim/common.hpp"

namespace lidarsim {

/// Rigid transform body -> map.
struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  static Pose from_yaw(const Vec3& position, double yaw) {
    return {position, Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()))};
  }

  Vec3 to_map(const Vec3& local) const { return orientation * local + position; }
  Vec3 to_local(const Vec3& world) const { return orientation.conjugate() * (world - position); }

  /// this * other (other expressed in this frame).
  Pose compose(const Pose& other) const {
    return {to_map(other.position), (orientation * other.orientation).normalized()};
  }

  bool valid() const { return std::abs(orientation.norm() - 1.0) <= 1e-9 && all_finite(position); }
};

}  // namespace lidarsim
