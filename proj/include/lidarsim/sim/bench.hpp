#pragma once

// Render benchmark: scans at seeded random poses inside the map bounds, with
// wall-clock timing, peak resident memory and map preprocessing time.

#include "lidarsim/sim/simulation.hpp"

#include <sys/resource.h>

namespace lidarsim {

struct BenchPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
};

struct BenchReport {
  std::string sensor;
  std::size_t map_points = 0;
  double preprocess_s = 0.0;
  std::vector<BenchPose> poses;
  std::vector<double> render_ms;
  std::vector<std::size_t> scan_points;
  double min_ms = 0.0, mean_ms = 0.0, p95_ms = 0.0;
  double peak_rss_mb = 0.0;

  /// Per-pose rows followed by summary rows; columns: kind,index,x,y,z,yaw,value,points.
  std::string to_csv() const {
    std::ostringstream out;
    out << "kind,index,x,y,z,yaw,value,points\n";
    for (std::size_t i = 0; i < poses.size(); ++i) {
      const auto& p = poses[i];
      out << "pose," << i << ',' << ini_format(p.position.x()) << ',' << ini_format(p.position.y()) << ','
          << ini_format(p.position.z()) << ',' << ini_format(p.yaw) << ',' << ini_format(render_ms[i]) << ','
          << scan_points[i] << '\n';
    }
    auto summary = [&](const char* name, double v) { out << name << ",,,,,," << ini_format(v) << ",\n"; };
    summary("min_ms", min_ms);
    summary("mean_ms", mean_ms);
    summary("p95_ms", p95_ms);
    summary("peak_rss_mb", peak_rss_mb);
    summary("preprocess_s", preprocess_s);
    summary("map_points", static_cast<double>(map_points));
    return out.str();
  }
};

/// Peak resident set size of this process, MiB.
inline double peak_rss_mb() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_maxrss) / 1024.0;  // ru_maxrss is KiB on Linux
}

/// Nearest-rank percentile, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

/// Random poses with at least `clearance` to the nearest map point, drawn inside
/// the map bounds shrunk by the clearance. Depends only on (map, seed).
inline std::vector<BenchPose> bench_poses(const PointMap& map, std::size_t count, std::uint64_t seed,
                                          double clearance = 0.5) {
  std::vector<BenchPose> out;
  if (count == 0 || map.empty()) return out;
  Rng rng = make_rng(seed, 7);
  const auto& b = map.bounds();
  const Vec3 lo = b.min + Vec3::Constant(clearance), hi = b.max - Vec3::Constant(clearance);
  auto axis = [&](int i) { return lo[i] < hi[i] ? uniform(rng, lo[i], hi[i]) : 0.5 * (b.min[i] + b.max[i]); };
  while (out.size() < count) {
    BenchPose p;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      p.position = Vec3(axis(0), axis(1), axis(2));
      if (map.tree()->nearest(p.position).distance >= clearance) break;
    }
    p.yaw = uniform(rng, -kPi, kPi);
    out.push_back(p);
  }
  return out;
}

/// Times one render of every pose. `preprocess_s` is the caller's measured map build time.
inline BenchReport run_bench(const PointMap& map, const SensorModel& model, std::size_t count, std::uint64_t seed,
                             double preprocess_s, RenderOptions options = {}) {
  BenchReport r;
  r.sensor = model.name;
  r.map_points = map.size();
  r.preprocess_s = preprocess_s;
  r.poses = bench_poses(map, count, seed);
  options.seed = seed;
  ScanRenderer renderer(model, options);
  for (std::size_t i = 0; i < r.poses.size(); ++i) {
    const Pose pose = Pose::from_yaw(r.poses[i].position, r.poses[i].yaw);
    const auto t0 = std::chrono::steady_clock::now();
    const auto scan = renderer.render_scan(map, nullptr, pose, static_cast<double>(i) / model.scan_rate);
    r.render_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    r.scan_points.push_back(scan.size());
  }
  if (!r.render_ms.empty()) {
    r.min_ms = *std::min_element(r.render_ms.begin(), r.render_ms.end());
    double sum = 0.0;
    for (double v : r.render_ms) sum += v;
    r.mean_ms = sum / static_cast<double>(r.render_ms.size());
    r.p95_ms = percentile(r.render_ms, 0.95);
  }
  r.peak_rss_mb = peak_rss_mb();
  return r;
}

/// Generator settings for the benchmark map: a 1M-point room at r_map = 0.05.
inline GenParams benchmark_map_params(std::uint64_t seed = 1) {
  GenParams g;
  g.kind = MapKind::Room;
  g.resolution = 0.05;
  g.size = Vec3(30.0, 30.0, 4.0);
  g.objects = 24;
  g.object_min = 0.6;
  g.object_max = 2.0;
  g.seed = seed;
  return g;
}

}  // namespace lidarsim
