#pragma once

// Quadrotor rigid-body model with a second-order motor model.
//
// X layout, body frame x forward / y left / z up, lever L = arm_length / sqrt(2):
//
//   motor  position    spin   yaw torque sign
//     0   (+L, -L)     CCW       -1
//     1   (-L, +L)     CCW       -1
//     2   (+L, +L)     CW        +1
//     3   (-L, -L)     CW        +1
//
// With f_i = k_f w_i^2 the mixer is
//   T     =      f0 + f1 + f2 + f3
//   tau_x = L (-f0 + f1 + f2 - f3)
//   tau_y = L (-f0 + f1 - f2 + f3)
//   tau_z = k_m/k_f (-f0 - f1 + f2 + f3)

#include "lidarsim/common.hpp"

#include <array>

namespace lidarsim {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double kGravity = 9.81;

struct UavParams {
  double mass = 1.0;                       // kg
  Vec3 inertia = Vec3(0.01, 0.01, 0.02);   // diagonal, kg m^2
  double arm_length = 0.17;                // m
  double thrust_coeff = 8.5e-6;            // N / (rad/s)^2
  double torque_coeff = 1.6e-7;            // N m / (rad/s)^2
  double motor_natural_freq = 60.0;        // rad/s
  double motor_damping = 1.0;
  double max_motor_speed = 1100.0;         // rad/s
  double uav_size = 0.3;                   // m
  double gravity = kGravity;               // m/s^2

  void validate() const {
    require_positive(mass, "mass");
    for (int i = 0; i < 3; ++i) require_positive(inertia[i], "inertia");
    require_positive(arm_length, "arm_length");
    require_positive(thrust_coeff, "thrust_coeff");
    require_positive(torque_coeff, "torque_coeff");
    require_positive(motor_natural_freq, "motor_natural_freq");
    require_positive(motor_damping, "motor_damping");
    require_positive(max_motor_speed, "max_motor_speed");
    require_positive(uav_size, "uav_size");
    require_positive(gravity, "gravity");
  }

  double hover_speed() const { return std::sqrt(mass * gravity / (4.0 * thrust_coeff)); }
  double max_thrust() const { return 4.0 * thrust_coeff * max_motor_speed * max_motor_speed; }
};

struct UavState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 angular_velocity = Vec3::Zero();  // body frame
  Vec4 motor_speeds = Vec4::Zero();
  Vec4 motor_rates = Vec4::Zero();
  double time = 0.0;

  static UavState hovering(const UavParams& params, const Vec3& position = Vec3::Zero(), double yaw = 0.0) {
    UavState s;
    s.position = position;
    s.orientation = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
    s.motor_speeds = Vec4::Constant(params.hover_speed());
    return s;
  }
};

/// Maps squared motor speeds to (T, tau_x, tau_y, tau_z).
inline Mat4 mixer_matrix(const UavParams& p) {
  const double l = p.arm_length / std::sqrt(2.0);
  const double kf = p.thrust_coeff, km = p.torque_coeff;
  Mat4 a;
  a << kf, kf, kf, kf,                             //
      -l * kf, l * kf, l * kf, -l * kf,            //
      -l * kf, l * kf, -l * kf, l * kf,            //
      -km, -km, km, km;
  return a;
}

struct Wrench {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();
};

inline Wrench motor_wrench(const Vec4& speeds, const UavParams& p) {
  const Vec4 out = mixer_matrix(p) * speeds.cwiseProduct(speeds);
  return {out[0], out.tail<3>()};
}

/// Speeds (rad/s) that realize a wrench, clamped to [0, max_motor_speed].
inline Vec4 mix_to_speeds(const Wrench& w, const UavParams& p) {
  Vec4 target;
  target << w.thrust, w.torque;
  const Vec4 sq = mixer_matrix(p).inverse() * target;
  Vec4 speeds;
  for (int i = 0; i < 4; ++i) speeds[i] = std::min(std::sqrt(std::max(0.0, sq[i])), p.max_motor_speed);
  return speeds;
}

// ---------------------------------------------------------------------------

struct MotorState {
  double speed = 0.0;
  double rate = 0.0;
};

/// Integrates s'' = wn^2 (cmd - s) - 2 zeta wn s' over dt with RK4; speed clamped to [0, max].
inline MotorState motor_step(MotorState s, double command, double dt, const UavParams& p) {
  require_positive(dt, "dt");
  const double wn = p.motor_natural_freq, zeta = p.motor_damping;
  auto f = [&](double x, double xd) { return wn * wn * (command - x) - 2.0 * zeta * wn * xd; };
  const double k1x = s.rate, k1v = f(s.speed, s.rate);
  const double k2x = s.rate + 0.5 * dt * k1v, k2v = f(s.speed + 0.5 * dt * k1x, k2x);
  const double k3x = s.rate + 0.5 * dt * k2v, k3v = f(s.speed + 0.5 * dt * k2x, k3x);
  const double k4x = s.rate + dt * k3v, k4v = f(s.speed + dt * k3x, k4x);
  MotorState out;
  out.speed = s.speed + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
  out.rate = s.rate + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v);
  if (out.speed < 0.0 || out.speed > p.max_motor_speed) {
    out.speed = std::clamp(out.speed, 0.0, p.max_motor_speed);
    out.rate = 0.0;
  }
  return out;
}

inline void step_motors(UavState& s, const Vec4& commands, double dt, const UavParams& p) {
  for (int i = 0; i < 4; ++i) {
    const auto m = motor_step({s.motor_speeds[i], s.motor_rates[i]}, commands[i], dt, p);
    s.motor_speeds[i] = m.speed;
    s.motor_rates[i] = m.rate;
  }
}

namespace detail {

struct BodyDerivative {
  Vec3 dp, dv;
  Eigen::Vector4d dq;  // (w, x, y, z)
  Vec3 dw;
};

inline Eigen::Vector4d quat_coeffs(const Quat& q) { return {q.w(), q.x(), q.y(), q.z()}; }
inline Quat quat_from(const Eigen::Vector4d& c) { return Quat(c[0], c[1], c[2], c[3]); }

inline BodyDerivative body_derivative(const Vec3& v, const Quat& q, const Vec3& w, const Wrench& wrench,
                                      const UavParams& p) {
  BodyDerivative d;
  d.dp = v;
  d.dv = -p.gravity * Vec3::UnitZ() + q.toRotationMatrix().col(2) * (wrench.thrust / p.mass);
  const Quat omega(0.0, w.x(), w.y(), w.z());
  const Quat qd = q * omega;
  d.dq = 0.5 * quat_coeffs(qd);
  const Vec3 jw = p.inertia.cwiseProduct(w);
  d.dw = (wrench.torque - w.cross(jw)).cwiseQuotient(p.inertia);
  return d;
}

}  // namespace detail

/// Acceleration of the body in the map frame for the current motor speeds.
inline Vec3 body_acceleration(const UavState& s, const UavParams& p) {
  const auto wrench = motor_wrench(s.motor_speeds, p);
  return -p.gravity * Vec3::UnitZ() + s.orientation.toRotationMatrix().col(2) * (wrench.thrust / p.mass);
}

/// One RK4 step of the rigid body with motor speeds held over dt.
inline UavState rigid_body_step(const UavState& s, const UavParams& p, double dt) {
  require_positive(dt, "dt");
  using detail::body_derivative;
  using detail::quat_coeffs;
  using detail::quat_from;
  const Wrench wrench = motor_wrench(s.motor_speeds, p);
  const Eigen::Vector4d q0 = quat_coeffs(s.orientation);

  const auto k1 = body_derivative(s.velocity, s.orientation, s.angular_velocity, wrench, p);
  const auto k2 = body_derivative(s.velocity + 0.5 * dt * k1.dv, quat_from(q0 + 0.5 * dt * k1.dq),
                                  s.angular_velocity + 0.5 * dt * k1.dw, wrench, p);
  const auto k3 = body_derivative(s.velocity + 0.5 * dt * k2.dv, quat_from(q0 + 0.5 * dt * k2.dq),
                                  s.angular_velocity + 0.5 * dt * k2.dw, wrench, p);
  const auto k4 = body_derivative(s.velocity + dt * k3.dv, quat_from(q0 + dt * k3.dq),
                                  s.angular_velocity + dt * k3.dw, wrench, p);

  UavState out = s;
  out.position = s.position + dt / 6.0 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp);
  out.velocity = s.velocity + dt / 6.0 * (k1.dv + 2 * k2.dv + 2 * k3.dv + k4.dv);
  out.orientation = quat_from(q0 + dt / 6.0 * (k1.dq + 2 * k2.dq + 2 * k3.dq + k4.dq)).normalized();
  out.angular_velocity = s.angular_velocity + dt / 6.0 * (k1.dw + 2 * k2.dw + 2 * k3.dw + k4.dw);
  out.time = s.time + dt;
  return out;
}

}  // namespace lidarsim
