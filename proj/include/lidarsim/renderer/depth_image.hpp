#pragma once

// Depth-image construction: voxel frustum culling, per-point angular footprint
// (interpolation radius) with a per-pixel minimum-range rule, and plane correction
// for points whose fitted local plane is thin enough and not on a crease.

#include "lidarsim/parallel.hpp"
#include "lidarsim/pointmap/point_map.hpp"
#include "lidarsim/renderer/pose.hpp"
#include "lidarsim/sensors/sensor_model.hpp"

#include <bit>
#include <cstring>

namespace lidarsim {

inline constexpr double kParallelEpsilon = 1e-3;
/// Circumradius of a point's square sample cell on its plane, in units of r_map.
inline constexpr double kPlanePatchRadius = 0.70710678118654752;

struct DepthImage {
  int width = 0;
  int height = 0;
  std::vector<double> range;               // +inf where invalid
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> plane_corrected;

  DepthImage() = default;
  DepthImage(int w, int h)
      : width(w), height(h), range(static_cast<std::size_t>(w) * h, kInf), valid(range.size(), 0),
        plane_corrected(range.size(), 0) {}

  std::size_t index(int u, int v) const { return static_cast<std::size_t>(v) * width + u; }
  double at(int u, int v) const { return range[index(u, v)]; }
  bool is_valid(int u, int v) const { return valid[index(u, v)] != 0; }
  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto b : valid) n += b;
    return n;
  }

  friend bool operator==(const DepthImage& a, const DepthImage& b) {
    return a.width == b.width && a.height == b.height && a.valid == b.valid &&
           a.plane_corrected == b.plane_corrected &&
           std::memcmp(a.range.data(), b.range.data(), a.range.size() * sizeof(double)) == 0;
  }
};

/// Angular radius subtended by a point's r_map cube at distance d: asin((sqrt(3)/2) r_map / d),
/// clamped to pi/2 once the argument reaches 1.
inline double interpolation_radius(double resolution, double distance) {
  require_positive(resolution, "r_map");
  require_positive(distance, "d");
  const double s = 0.5 * std::sqrt(3.0) * resolution / distance;
  return s >= 1.0 ? kPi / 2 : std::asin(s);
}

/// Distance beyond which a point's footprint is narrower than one pixel.
inline double max_interpolation_distance(double resolution, double theta_res) {
  return 0.5 * std::sqrt(3.0) * resolution / std::sin(theta_res);
}

/// Range along `ray` to the plane through `point` with `normal`; empty when grazing.
inline std::optional<double> plane_correct_depth(const Vec3& ray, const Vec3& point, const Vec3& normal,
                                                 double parallel_eps = kParallelEpsilon) {
  const double denom = ray.dot(normal);
  if (std::abs(denom) <= parallel_eps) return std::nullopt;
  return point.dot(normal) / denom;
}

// ---------------------------------------------------------------------------
// Frustum culling

/// Lower bound on the angle between a sensor-frame direction and any direction inside
/// the FoV (|azimuth| <= fov_h/2, |elevation| <= fov_v/2).
inline double angle_outside_fov(const SensorModel& m, const Vec3& dir) {
  const double rxy = std::sqrt(dir.x() * dir.x() + dir.y() * dir.y());
  const double el = std::atan2(dir.z(), rxy);
  const double el_gap = std::max(0.0, std::abs(el) - m.fov_v / 2);
  double az_gap = 0.0;
  if (!m.wraps_azimuth() && m.fov_h < 2.0 * kPi) {
    const double daz = std::abs(std::atan2(dir.y(), dir.x())) - m.fov_h / 2;
    if (daz > 0.0) az_gap = daz <= kPi / 2 ? std::asin(std::min(1.0, std::cos(el) * std::sin(daz))) : kPi / 2 - std::abs(el);
  }
  return std::max(el_gap, az_gap);
}

/// Indices of map points in every voxel whose bounding sphere can reach the FoV
/// cone truncated at max_range. Conservative. Order is unspecified; the
/// min-range rule makes the rendered image independent of it.
inline std::vector<std::uint32_t> frustum_cull(const PointMap& map, const Pose& sensor_pose, const SensorModel& m) {
  std::vector<std::uint32_t> out;
  const auto& voxels = map.voxels();
  const double radius = 0.5 * std::sqrt(3.0) * voxels.edge;
  out.reserve(map.size() / 4);
  for (const auto& [key, range] : voxels.cells) {
    const Vec3 local = sensor_pose.to_local(voxel_center(key, voxels.edge));
    const double dist = local.norm();
    if (dist - radius > m.max_range) continue;
    if (dist > radius) {
      const double spread = std::asin(std::min(1.0, radius / dist));
      if (angle_outside_fov(m, local / dist) > spread) continue;
    }
    const auto idx = voxels.points_in(range);
    out.insert(out.end(), idx.begin(), idx.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rasterization

enum class RenderBackend { Sequential, Parallel };

struct RasterOptions {
  double planarity_threshold = kDefaultPlanarityThreshold;  // gamma_thresh, m
  double parallel_eps = kParallelEpsilon;
  bool plane_correction = true;
  RenderBackend backend = RenderBackend::Parallel;
  unsigned threads = default_thread_count();
};

/// Points fed to the rasterizer. `normals`/`plane_quality` may be empty (flat fill).
struct PointSource {
  std::span<const Vec3> points;
  std::span<const Vec3> normals;
  std::span<const double> plane_quality;
  std::span<const std::uint8_t> crease;
  std::span<const std::uint32_t> subset;
  bool use_subset = false;  // false = every point
  double resolution = 0.1;

  std::size_t count() const { return use_subset ? subset.size() : points.size(); }
  std::uint32_t at(std::size_t i) const { return use_subset ? subset[i] : static_cast<std::uint32_t>(i); }
};

namespace detail {

// Per-pixel key: float range bits in the high word (positive floats order like
// unsigned ints), plane-correction flag in the low word. min() on keys is the
// min-range rule with a deterministic tie break.
using DepthKey = std::uint64_t;

// Pixel-unit margin on window bounds against rounding in the projection.
inline constexpr double kWindowSlack = 1e-6;
inline constexpr DepthKey kEmptyKey = ~DepthKey{0};

inline DepthKey make_key(double range, bool corrected) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(range));
  return (DepthKey{bits} << 32) | (corrected ? 0u : 1u);
}

inline void rasterize_range(const PointSource& src, const Pose& sensor_pose, const SensorModel& m,
                            const RayTable& rays, const RasterOptions& opt, std::size_t begin, std::size_t end,
                            std::vector<DepthKey>& keys) {
  const Mat3 rot_t = sensor_pose.orientation.conjugate().toRotationMatrix();
  const Vec3 origin = sensor_pose.position;
  const double half_diag = 0.5 * std::sqrt(3.0) * src.resolution;
  const double patch_radius2 = kPlanePatchRadius * kPlanePatchRadius * src.resolution * src.resolution;
  const double far_cut = m.max_range + src.resolution;
  const double res_h = m.theta_res_h(), res_v = m.theta_res_v();
  const bool wraps = m.wraps_azimuth();
  const bool pinhole = m.projection == Projection::Pinhole;
  const double tan_h = std::tan(m.fov_h / 2), tan_v = std::tan(m.fov_v / 2);
  const bool have_planes = opt.plane_correction && !src.normals.empty();

  for (std::size_t i = begin; i < end; ++i) {
    const std::uint32_t id = src.at(i);
    const Vec3 q = rot_t * (src.points[id] - origin);
    const double d = q.norm();
    if (!(d > 0.0) || d > far_cut) continue;
    const Vec3 dir = q / d;
    const double s = half_diag / d;  // sin(theta)
    const double cos_theta = s >= 1.0 ? 0.0 : std::sqrt(1.0 - s * s);

    // Points just outside the FoV still cover border pixels with their disc,
    // measured from the clamped direction. `reach` bounds the disc radius from
    // above (tan theta >= theta); the per-pixel test below is exact.
    auto c = project_continuous(m, dir);
    const bool inside = c.has_value();
    double reach = s >= 1.0 ? kPi / 2 : std::min(kPi / 2, s / cos_theta);
    double cos_el_max;  // lower bound on cos(elevation) over the disc
    if (inside) {
      const double cos_el = std::sqrt(dir.x() * dir.x() + dir.y() * dir.y());
      cos_el_max = reach >= kPi / 2 ? 0.0 : std::max(0.0, cos_el * cos_theta - std::abs(dir.z()) * s);
    } else {
      const double theta = s >= 1.0 ? kPi / 2 : std::asin(s);
      if (angle_outside_fov(m, dir) > theta) continue;
      c = project_clamped(m, dir);
      if (!c) continue;
      const Vec3 edge_dir = continuous_to_ray(m, *c);
      reach = theta + std::acos(std::clamp(edge_dir.dot(dir), -1.0, 1.0));
      const double el = std::abs(c->y() * res_v - m.fov_v / 2);
      cos_el_max = std::cos(std::min(el + reach, kPi / 2));
    }
    const int uc = std::min(static_cast<int>(c->x()), m.width - 1);
    const int vc = std::min(static_cast<int>(c->y()), m.height - 1);

    // Pixel window [u0, u1] x [v0, v1] holding every pixel center within reach.
    int u0, u1, v0, v1;
    if (!pinhole) {
      // Rows: the angle to a pixel is at least the elevation difference.
      // Columns: haversine gives sin(daz/2) <= sin(reach/2) / cos_el_max, and
      // asin(y) <= y / sqrt(1 - y^2).
      const double rv = reach / res_v;
      const double y = cos_el_max > 0.0 ? 0.5 * reach / cos_el_max : kInf;
      const double ru = y >= 0.7 ? kInf : 2.0 * y / std::sqrt(1.0 - y * y) / res_h;
      v0 = static_cast<int>(std::ceil(c->y() - 0.5 - rv - kWindowSlack));
      v1 = static_cast<int>(std::floor(c->y() - 0.5 + rv + kWindowSlack));
      if (wraps && 2.0 * ru + 1.0 >= m.width) {
        u0 = 0;
        u1 = m.width - 1;
      } else {
        const double cu0 = std::ceil(c->x() - 0.5 - ru - kWindowSlack);
        const double cu1 = std::floor(c->x() - 0.5 + ru + kWindowSlack);
        u0 = static_cast<int>(std::max(cu0, -2.0 * m.width));
        u1 = static_cast<int>(std::min(cu1, 3.0 * m.width));
      }
    } else {
      const double off = std::acos(std::clamp(dir.x(), -1.0, 1.0));
      const double edge = std::min(off + reach, kPi / 2 - 1e-6);
      const double sec2 = 1.0 / (std::cos(edge) * std::cos(edge));
      const int wu = static_cast<int>(std::ceil(reach * sec2 / (2.0 * tan_h / m.width))) + 1;
      const int wv = static_cast<int>(std::ceil(reach * sec2 / (2.0 * tan_v / m.height))) + 1;
      u0 = uc - wu;
      u1 = uc + wu;
      v0 = vc - wv;
      v1 = vc + wv;
    }
    u0 = std::min(u0, uc);
    u1 = std::max(u1, uc);
    v0 = std::max(0, std::min(v0, vc));
    v1 = std::min(m.height - 1, std::max(v1, vc));
    if (!wraps) {
      u0 = std::max(u0, 0);
      u1 = std::min(u1, m.width - 1);
    } else if (u1 - u0 + 1 > m.width) {
      u0 = 0;
      u1 = m.width - 1;
    }

    bool planar = false;
    Vec3 n_local;
    if (have_planes && src.plane_quality[id] <= opt.planarity_threshold && (src.crease.empty() || !src.crease[id])) {
      planar = true;
      n_local = rot_t * src.normals[id];
    }
    const double plane_offset = planar ? q.dot(n_local) : 0.0;

    for (int v = v0; v <= v1; ++v) {
      for (int uu = u0; uu <= u1; ++uu) {
        int u = uu;
        if (wraps) {
          u %= m.width;
          if (u < 0) u += m.width;
        }
        const bool center = inside && u == uc && v == vc;
        const Vec3& ray = rays.at(u, v);
        if (!center && ray.dot(dir) < cos_theta) continue;
        double value = d;
        bool corrected = false;
        if (planar) {
          // The plane stands in for the point only over its own sample cell; a
          // ray meeting the plane outside that patch is left to other points.
          const double denom = ray.dot(n_local);
          if (std::abs(denom) > opt.parallel_eps) {
            const double t = plane_offset / denom;
            if ((t * ray - q).squaredNorm() > patch_radius2) continue;
            value = t;
            corrected = true;
          }
        }
        if (!(value > 0.0)) continue;
        auto& slot = keys[static_cast<std::size_t>(v) * m.width + u];
        slot = std::min(slot, make_key(value, corrected));
      }
    }
  }
}

}  // namespace detail

class Rasterizer {
public:
  Rasterizer(const SensorModel& model, RasterOptions options = {})
      : model_(model), rays_(model), options_(options) {}

  const SensorModel& model() const { return model_; }
  const RayTable& rays() const { return rays_; }
  const RasterOptions& options() const { return options_; }

  /// Min-range depth image over all sources. Pixels outside [min_range, max_range] are invalid.
  DepthImage rasterize(std::span<const PointSource> sources, const Pose& sensor_pose) const {
    const auto& m = model_;
    std::vector<detail::DepthKey> keys(m.pixel_count(), detail::kEmptyKey);
    std::size_t total = 0;
    for (const auto& s : sources) total += s.count();
    const unsigned threads =
        options_.backend == RenderBackend::Sequential ? 1u : std::max(1u, std::min<unsigned>(options_.threads, 64));
    if (threads == 1 || total < 4096) {
      for (const auto& s : sources) detail::rasterize_range(s, sensor_pose, m, rays_, options_, 0, s.count(), keys);
    } else {
      std::vector<std::vector<detail::DepthKey>> partial(threads);
      for (const auto& s : sources) {
        parallel_chunks(s.count(), threads, [&](unsigned t, std::size_t b, std::size_t e) {
          if (partial[t].empty()) partial[t].assign(m.pixel_count(), detail::kEmptyKey);
          detail::rasterize_range(s, sensor_pose, m, rays_, options_, b, e, partial[t]);
        });
      }
      for (const auto& p : partial)
        if (!p.empty())
          for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = std::min(keys[i], p[i]);
    }
    DepthImage img(m.width, m.height);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      if (keys[i] == detail::kEmptyKey) continue;
      const double r = std::bit_cast<float>(static_cast<std::uint32_t>(keys[i] >> 32));
      if (r < m.min_range || r > m.max_range) continue;
      img.range[i] = r;
      img.valid[i] = 1;
      img.plane_corrected[i] = (keys[i] & 1u) == 0 ? 1 : 0;
    }
    return img;
  }

private:
  SensorModel model_;
  RayTable rays_;
  RasterOptions options_;
};

inline PointSource map_source(const PointMap& map, std::span<const std::uint32_t> candidates) {
  return {map.points(), map.normals(), map.plane_quality(), map.crease(), candidates, true, map.resolution()};
}

/// One-shot helper: rasterize the candidate map points.
inline DepthImage rasterize_depth(std::span<const std::uint32_t> candidates, const PointMap& map,
                                  const Pose& sensor_pose, const SensorModel& model, RasterOptions options = {}) {
  Rasterizer r(model, options);
  const PointSource src = map_source(map, candidates);
  return r.rasterize(std::span<const PointSource>(&src, 1), sensor_pose);
}

}  // namespace lidarsim
