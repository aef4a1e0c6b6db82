#pragma once

// Cascaded dual-loop controller: an outer position PID producing a collective
// thrust and desired attitude, and an inner attitude PD producing motor speeds.
// Gains are placed per double-integrator loop (kp = wn^2, kd = 2 zeta wn), scaled
// by mass for the position loop and by the inertia for the attitude loop.

#include "lidarsim/vehicle/dynamics.hpp"

namespace lidarsim {

struct LoopSpec {
  double natural_freq = 2.0;  // rad/s
  double damping = 1.0;
};

struct ControllerGains {
  Vec3 pos_kp = Vec3::Zero(), pos_kd = Vec3::Zero(), pos_ki = Vec3::Zero();  // N/m, N s/m, N/(m s)
  Vec3 att_kp = Vec3::Zero(), att_kd = Vec3::Zero();                          // roll, pitch, yaw
};

inline constexpr double kCascadeSeparation = 5.0;

inline ControllerGains tune_gains(LoopSpec position, LoopSpec attitude, const UavParams& p) {
  require_positive(position.natural_freq, "position.natural_freq");
  require_positive(position.damping, "position.damping");
  require_positive(attitude.natural_freq, "attitude.natural_freq");
  require_positive(attitude.damping, "attitude.damping");
  if (attitude.natural_freq < kCascadeSeparation * position.natural_freq)
    throw ParameterError("attitude.natural_freq", "must be at least 5x the position loop frequency");
  ControllerGains g;
  const double pw = position.natural_freq, aw = attitude.natural_freq;
  g.pos_kp = Vec3::Constant(p.mass * pw * pw);
  g.pos_kd = Vec3::Constant(p.mass * 2.0 * position.damping * pw);
  g.att_kp = p.inertia * (aw * aw);
  g.att_kd = p.inertia * (2.0 * attitude.damping * aw);
  return g;
}

struct Setpoint {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

struct AttitudeCommand {
  Quat attitude = Quat::Identity();
  double thrust = 0.0;  // N
};

/// Desired attitude whose body z is along `force` with the given heading.
inline Quat attitude_from_force(const Vec3& force, double yaw) {
  const double n = force.norm();
  const Vec3 zb = n > 1e-9 ? Vec3(force / n) : Vec3::UnitZ();
  const Vec3 xc(std::cos(yaw), std::sin(yaw), 0.0);
  Vec3 yb = zb.cross(xc);
  if (yb.norm() < 1e-9) yb = zb.cross(Vec3::UnitX());
  yb.normalize();
  const Vec3 xb = yb.cross(zb);
  Mat3 r;
  r.col(0) = xb;
  r.col(1) = yb;
  r.col(2) = zb;
  return Quat(r).normalized();
}

/// Outer loop. `integral` accumulates the position error when non-null.
inline AttitudeCommand position_control(const UavState& s, const Setpoint& sp, const ControllerGains& g,
                                        const UavParams& p, Vec3* integral = nullptr, double dt = 0.0) {
  const Vec3 err = sp.position - s.position;
  Vec3 force = g.pos_kp.cwiseProduct(err) - g.pos_kd.cwiseProduct(s.velocity);
  if (integral) {
    *integral += err * dt;
    force += g.pos_ki.cwiseProduct(*integral);
  }
  force += p.mass * p.gravity * Vec3::UnitZ();
  AttitudeCommand cmd;
  cmd.thrust = std::clamp(force.norm(), 0.0, p.max_thrust());
  cmd.attitude = attitude_from_force(force, sp.yaw);
  return cmd;
}

/// Inverted mixer with actuator priority: collective thrust first, then roll/pitch
/// torque scaled to fit, then yaw torque clamped to the remaining headroom. Equals
/// mix_to_speeds whenever that needs no clamping. Yaw authority (k_m/k_f) is far
/// weaker than the roll/pitch lever, so an unclamped yaw demand would saturate
/// every motor and take thrust and attitude control with it.
inline Vec4 mix_with_priority(const Wrench& w, const UavParams& p) {
  const Mat4 inv = mixer_matrix(p).inverse();
  const double hi = p.max_motor_speed * p.max_motor_speed;
  Vec4 target;
  target << w.thrust, w.torque;
  const Vec4 exact = inv * target;
  if (exact.minCoeff() >= 0.0 && exact.maxCoeff() <= hi) return exact.cwiseSqrt();
  const Vec4 base = inv.col(0) * std::clamp(w.thrust, 0.0, p.max_thrust());
  // Largest s in [0, 1] keeping base + s * delta inside [0, hi] for every motor.
  auto fit = [&](const Vec4& from, const Vec4& delta) {
    double s = 1.0;
    for (int i = 0; i < 4; ++i) {
      if (delta[i] > 0.0) s = std::min(s, (hi - from[i]) / delta[i]);
      else if (delta[i] < 0.0) s = std::min(s, -from[i] / delta[i]);
    }
    return std::max(0.0, s);
  };
  const Vec4 rp = inv.col(1) * w.torque.x() + inv.col(2) * w.torque.y();
  const Vec4 with_rp = base + fit(base, rp) * rp;
  const Vec4 yaw = inv.col(3) * w.torque.z();
  const Vec4 sq = with_rp + fit(with_rp, yaw) * yaw;
  Vec4 speeds;
  for (int i = 0; i < 4; ++i) speeds[i] = std::min(std::sqrt(std::max(0.0, sq[i])), p.max_motor_speed);
  return speeds;
}

/// Inner loop: PD on the quaternion error plus gyroscopic feed-forward, then the
/// inverted mixer. Returns motor speed commands.
inline Vec4 attitude_control(const UavState& s, const AttitudeCommand& cmd, const ControllerGains& g,
                             const UavParams& p) {
  Quat q_err = s.orientation.conjugate() * cmd.attitude;
  if (q_err.w() < 0.0) q_err.coeffs() = -q_err.coeffs();
  const Vec3 e = 2.0 * q_err.vec();
  const Vec3& w = s.angular_velocity;
  const Vec3 torque = g.att_kp.cwiseProduct(e) - g.att_kd.cwiseProduct(w) + w.cross(p.inertia.cwiseProduct(w));
  return mix_with_priority({cmd.thrust, torque}, p);
}

struct ControlRates {
  double attitude_hz = 1000.0;
  double position_hz = 100.0;
};

/// Quadrotor plus cascaded controller stepped at a fixed physics rate.
class Quadrotor {
public:
  Quadrotor(UavParams params, ControllerGains gains, UavState initial, ControlRates rates = {},
            double physics_dt = 1e-3)
      : params_(params), gains_(gains), state_(initial), rates_(rates), dt_(physics_dt) {
    params_.validate();
    require_positive(physics_dt, "physics_dt");
    require_positive(rates.attitude_hz, "rates.attitude");
    require_positive(rates.position_hz, "rates.position");
    setpoint_.position = initial.position;
    setpoint_.yaw = yaw_of(initial.orientation);
    motor_cmd_ = initial.motor_speeds;
  }

  static double yaw_of(const Quat& q) {
    const Vec3 x = q * Vec3::UnitX();
    return std::atan2(x.y(), x.x());
  }

  void set_setpoint(const Setpoint& sp) { setpoint_ = sp; }
  const Setpoint& setpoint() const { return setpoint_; }
  const UavState& state() const { return state_; }
  const UavParams& params() const { return params_; }
  double dt() const { return dt_; }

  /// Map-frame acceleration over the last step.
  const Vec3& last_acceleration() const { return last_accel_; }

  void step() {
    const double t = state_.time;
    if (t + 1e-12 >= next_position_) {
      att_cmd_ = position_control(state_, setpoint_, gains_, params_, &integral_, 1.0 / rates_.position_hz);
      next_position_ += 1.0 / rates_.position_hz;
    }
    if (t + 1e-12 >= next_attitude_) {
      motor_cmd_ = attitude_control(state_, att_cmd_, gains_, params_);
      next_attitude_ += 1.0 / rates_.attitude_hz;
    }
    const Vec3 v0 = state_.velocity;
    step_motors(state_, motor_cmd_, dt_, params_);
    state_ = rigid_body_step(state_, params_, dt_);
    last_accel_ = (state_.velocity - v0) / dt_;
  }

private:
  UavParams params_;
  ControllerGains gains_;
  UavState state_;
  ControlRates rates_;
  double dt_;
  Setpoint setpoint_;
  AttitudeCommand att_cmd_;
  Vec4 motor_cmd_;
  Vec3 integral_ = Vec3::Zero();
  Vec3 last_accel_ = Vec3::Zero();
  double next_position_ = 0.0;
  double next_attitude_ = 0.0;
};

}  // namespace lidarsim
