#pragma once

#include "lidarsim/sensors/sensor_model.hpp"

namespace lidarsim {

/// Pixels sampled by the scanning pattern during one frame, row-major.
struct PatternMask {
  int width = 0;
  int height = 0;
  double frame_start = 0.0;
  std::vector<std::uint8_t> bits;

  bool at(int u, int v) const { return bits[static_cast<std::size_t>(v) * width + u] != 0; }
  void set(int u, int v) { bits[static_cast<std::size_t>(v) * width + u] = 1; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b;
    return n;
  }
};

/// Rosette deflection angles (azimuth, elevation) at time t.
inline std::pair<double, double> rosette_angles(const PatternSpec& p, double t) {
  const double w1 = 2.0 * kPi * p.f1 * t, w2 = 2.0 * kPi * p.f2 * t;
  return {p.a1 * std::cos(w1) + p.a2 * std::cos(w2), p.a1 * std::sin(w1) + p.a2 * std::sin(w2)};
}

inline PatternMask generate_pattern_mask(const SensorModel& m, double frame_start, double frame_dt) {
  require_positive(frame_dt, "frame_dt");
  PatternMask mask{m.width, m.height, frame_start, std::vector<std::uint8_t>(m.pixel_count(), 0)};
  const auto& p = m.pattern;
  auto mark = [&](double az, double el) {
    if (auto px = project_to_pixel(m, direction_from_angles(az, el))) mask.set(px->u, px->v);
  };
  switch (p.kind) {
    case PatternKind::FullRaster:
      std::fill(mask.bits.begin(), mask.bits.end(), 1);
      break;
    case PatternKind::RingSpin:
      for (double el : p.ring_elevations) {
        const double e = std::clamp(el, -m.fov_v / 2 + 1e-9, m.fov_v / 2 - 1e-9);
        // One row per ring on spherical images; a ring on a row boundary would otherwise
        // split across two rows by rounding.
        const auto row = project_to_pixel(m, direction_from_angles(0.0, e));
        for (int j = 0; j < p.azimuth_samples; ++j) {
          const double az = -m.fov_h / 2 + (j + 0.5) * m.fov_h / p.azimuth_samples;
          if (m.projection == Projection::Spherical && row) {
            if (auto px = project_to_pixel(m, direction_from_angles(az, 0.0))) mask.set(px->u, row->v);
          } else {
            mark(az, e);
          }
        }
      }
      break;
    case PatternKind::Rosette: {
      const double t0 = p.phase_continuity ? frame_start : 0.0;
      for (int k = 0; k < p.samples_per_frame; ++k) {
        const auto [az, el] = rosette_angles(p, t0 + k * frame_dt / p.samples_per_frame);
        mark(az, el);
      }
      break;
    }
  }
  if (mask.count() == 0) mask.set(m.width / 2, m.height / 2);
  return mask;
}

}  // namespace lidarsim
