#pragma once

#include "lidarsim/sensors/noise.hpp"
#include "lidarsim/vehicle/dynamics.hpp"

namespace lidarsim {

struct ImuSample {
  Vec3 specific_acceleration = Vec3::Zero();  // body frame, m/s^2
  Vec3 angular_velocity = Vec3::Zero();       // body frame, rad/s
  double timestamp = 0.0;
};

struct ImuNoiseConfig {
  double accel_sigma = 0.05;       // m/s^2
  double gyro_sigma = 0.005;       // rad/s
  double accel_bias_sigma = 0.02;  // m/s^2, drawn once per run
  double gyro_bias_sigma = 0.001;  // rad/s, drawn once per run

  static ImuNoiseConfig noiseless() { return {0.0, 0.0, 0.0, 0.0}; }
};

inline Vec3 gaussian_vec(Rng& rng, double sigma) {
  if (sigma == 0.0) return Vec3::Zero();
  return Vec3(standard_normal(rng), standard_normal(rng), standard_normal(rng)) * sigma;
}

/// IMU model with per-run constant biases.
class ImuModel {
public:
  ImuModel(ImuNoiseConfig cfg, Rng& rng, double gravity = kGravity)
      : cfg_(cfg), gravity_(gravity), accel_bias_(gaussian_vec(rng, cfg.accel_bias_sigma)),
        gyro_bias_(gaussian_vec(rng, cfg.gyro_bias_sigma)) {}

  const Vec3& accel_bias() const { return accel_bias_; }
  const Vec3& gyro_bias() const { return gyro_bias_; }

  /// `true_acceleration` is the map-frame acceleration of the body.
  ImuSample synthesize(const UavState& s, const Vec3& true_acceleration, Rng& rng) const {
    ImuSample out;
    out.timestamp = s.time;
    out.specific_acceleration = s.orientation.conjugate() * (true_acceleration + gravity_ * Vec3::UnitZ()) +
                                accel_bias_ + gaussian_vec(rng, cfg_.accel_sigma);
    out.angular_velocity = s.angular_velocity + gyro_bias_ + gaussian_vec(rng, cfg_.gyro_sigma);
    return out;
  }

private:
  ImuNoiseConfig cfg_;
  double gravity_;
  Vec3 accel_bias_;
  Vec3 gyro_bias_;
};

}  // namespace lidarsim
