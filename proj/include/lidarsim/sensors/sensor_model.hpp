#pragma once

#include "lidarsim/common.hpp"

#include <cmath>
#include <optional>

namespace lidarsim {

enum class Projection { Spherical, Pinhole };
enum class PatternKind { FullRaster, RingSpin, Rosette };

struct PatternSpec {
  PatternKind kind = PatternKind::FullRaster;
  // RingSpin
  std::vector<double> ring_elevations;  // rad
  int azimuth_samples = 0;
  // Rosette: a(t) = A1 cos(2 pi f1 t) + A2 cos(2 pi f2 t), e(t) likewise with sin
  double f1 = 50.0, f2 = 80.9;           // Hz
  double a1 = 0.0, a2 = 0.0;             // rad
  int samples_per_frame = 0;
  bool phase_continuity = true;
};

struct NoiseSpec {
  double range_sigma = 0.02;  // m
  std::uint64_t stream = 0;   // mixed into the run seed
};

struct PixelCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

struct SensorModel {
  std::string name = "custom";
  double fov_h = deg2rad(77.0);
  double fov_v = deg2rad(70.0);
  int width = 385;
  int height = 350;
  double min_range = 0.1;
  double max_range = 30.0;
  Projection projection = Projection::Spherical;
  PatternSpec pattern;
  NoiseSpec noise;
  double scan_rate = 10.0;  // Hz

  double theta_res_h() const { return fov_h / width; }
  double theta_res_v() const { return fov_v / height; }
  bool wraps_azimuth() const { return projection == Projection::Spherical && fov_h >= 2.0 * kPi - 1e-12; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

  void validate() const {
    if (!(fov_h > 0.0 && fov_h <= 2.0 * kPi + 1e-12)) throw ParameterError("fov_h", "must be in (0, 2pi]");
    if (!(fov_v > 0.0 && fov_v < kPi)) throw ParameterError("fov_v", "must be in (0, pi)");
    if (projection == Projection::Pinhole && !(fov_h < kPi)) throw ParameterError("fov_h", "pinhole needs fov_h < pi");
    if (width < 1 || height < 1) throw ParameterError("image", "width and height must be >= 1");
    if (!(min_range >= 0.0 && min_range < max_range)) throw ParameterError("range", "need 0 <= min_range < max_range");
    if (!(scan_rate > 0.0)) throw ParameterError("scan_rate", "must be > 0");
    if (!(noise.range_sigma >= 0.0)) throw ParameterError("range_sigma", "must be >= 0");
    switch (pattern.kind) {
      case PatternKind::FullRaster: break;
      case PatternKind::RingSpin:
        if (pattern.ring_elevations.empty()) throw ParameterError("rings", "ring list is empty");
        if (pattern.azimuth_samples <= 0) throw ParameterError("azimuth_samples", "must be > 0");
        for (double e : pattern.ring_elevations)
          if (std::abs(e) > fov_v / 2 + 1e-12) throw ParameterError("rings", "elevation outside vertical FoV");
        break;
      case PatternKind::Rosette:
        if (!(pattern.f1 > 0.0 && pattern.f2 > 0.0)) throw ParameterError("rosette.f", "frequencies must be > 0");
        if (pattern.samples_per_frame <= 0) throw ParameterError("samples_per_frame", "must be > 0");
        if (!(pattern.a1 >= 0.0 && pattern.a2 >= 0.0)) throw ParameterError("rosette.a", "must be >= 0");
        break;
    }
  }
};

/// Unit ray through continuous image coordinates (uf, vf); pixel u spans [u, u+1).
inline Vec3 continuous_to_ray(const SensorModel& m, const Eigen::Vector2d& c) {
  if (m.projection == Projection::Spherical) {
    const double az = c.x() * m.theta_res_h() - m.fov_h / 2;
    const double el = c.y() * m.theta_res_v() - m.fov_v / 2;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  }
  const double th = std::tan(m.fov_h / 2), tv = std::tan(m.fov_v / 2);
  const double y = th * (2.0 * c.x() / m.width - 1.0);
  const double z = tv * (2.0 * c.y() / m.height - 1.0);
  return Vec3(1.0, y, z).normalized();
}

/// Unit ray of pixel (u, v) in the sensor frame (x forward, y left, z up).
inline Vec3 pixel_to_ray(const SensorModel& m, int u, int v) {
  if (u < 0 || u >= m.width || v < 0 || v >= m.height)
    throw ParameterError("pixel", "(" + std::to_string(u) + ", " + std::to_string(v) + ") outside image");
  return continuous_to_ray(m, Eigen::Vector2d(u + 0.5, v + 0.5));
}

/// Continuous image coordinates of a sensor-frame direction (pixel u spans [u, u+1)).
/// Empty when the direction falls outside the FoV.
inline std::optional<Eigen::Vector2d> project_continuous(const SensorModel& m, const Vec3& dir) {
  if (m.projection == Projection::Spherical) {
    const double rxy = std::sqrt(dir.x() * dir.x() + dir.y() * dir.y());
    const double az = std::atan2(dir.y(), dir.x());
    const double el = std::atan2(dir.z(), rxy);
    double uf = (az + m.fov_h / 2) / m.theta_res_h();
    const double vf = (el + m.fov_v / 2) / m.theta_res_v();
    if (m.wraps_azimuth()) {
      uf = std::fmod(uf, static_cast<double>(m.width));
      if (uf < 0) uf += m.width;
    }
    if (!(uf >= 0.0 && uf < m.width && vf >= 0.0 && vf < m.height)) return std::nullopt;
    return Eigen::Vector2d(uf, vf);
  }
  if (!(dir.x() > 0.0)) return std::nullopt;
  const double th = std::tan(m.fov_h / 2), tv = std::tan(m.fov_v / 2);
  const double uf = (dir.y() / dir.x() / th + 1.0) * 0.5 * m.width;
  const double vf = (dir.z() / dir.x() / tv + 1.0) * 0.5 * m.height;
  if (!(uf >= 0.0 && uf < m.width && vf >= 0.0 && vf < m.height)) return std::nullopt;
  return Eigen::Vector2d(uf, vf);
}

/// Like project_continuous but clamps directions outside the FoV to the image
/// border. Empty only for pinhole directions at or behind the image plane.
inline std::optional<Eigen::Vector2d> project_clamped(const SensorModel& m, const Vec3& dir) {
  const double top_u = std::nextafter(static_cast<double>(m.width), 0.0);
  const double top_v = std::nextafter(static_cast<double>(m.height), 0.0);
  if (m.projection == Projection::Spherical) {
    const double rxy = std::sqrt(dir.x() * dir.x() + dir.y() * dir.y());
    double uf = (std::atan2(dir.y(), dir.x()) + m.fov_h / 2) / m.theta_res_h();
    const double vf = (std::atan2(dir.z(), rxy) + m.fov_v / 2) / m.theta_res_v();
    if (m.wraps_azimuth()) {
      uf = std::fmod(uf, static_cast<double>(m.width));
      if (uf < 0) uf += m.width;
    }
    return Eigen::Vector2d(std::clamp(uf, 0.0, top_u), std::clamp(vf, 0.0, top_v));
  }
  if (!(dir.x() > 1e-9)) return std::nullopt;
  const double th = std::tan(m.fov_h / 2), tv = std::tan(m.fov_v / 2);
  const double uf = (dir.y() / dir.x() / th + 1.0) * 0.5 * m.width;
  const double vf = (dir.z() / dir.x() / tv + 1.0) * 0.5 * m.height;
  return Eigen::Vector2d(std::clamp(uf, 0.0, top_u), std::clamp(vf, 0.0, top_v));
}

inline std::optional<PixelCoord> project_to_pixel(const SensorModel& m, const Vec3& dir) {
  auto c = project_continuous(m, dir);
  if (!c) return std::nullopt;
  PixelCoord px{static_cast<int>(std::floor(c->x())), static_cast<int>(std::floor(c->y()))};
  px.u = std::min(px.u, m.width - 1);
  px.v = std::min(px.v, m.height - 1);
  return px;
}

/// Direction for a (azimuth, elevation) pair, used by the scan patterns.
inline Vec3 direction_from_angles(double azimuth, double elevation) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
}

/// Precomputed unit rays for all pixels, row-major (index v * width + u).
struct RayTable {
  int width = 0, height = 0;
  std::vector<Vec3> rays;

  explicit RayTable(const SensorModel& m) : width(m.width), height(m.height), rays(m.pixel_count()) {
    for (int v = 0; v < m.height; ++v)
      for (int u = 0; u < m.width; ++u) rays[static_cast<std::size_t>(v) * width + u] = pixel_to_ray(m, u, v);
  }
  const Vec3& at(int u, int v) const { return rays[static_cast<std::size_t>(v) * width + u]; }
};

}  // namespace lidarsim
