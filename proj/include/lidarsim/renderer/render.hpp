#pragma once

#include "lidarsim/renderer/depth_image.hpp"
#include "lidarsim/sensors/noise.hpp"
#include "lidarsim/sensors/pattern.hpp"

namespace lidarsim {

struct ScanCloud {
  double timestamp = 0.0;
  PointList points;               // sensor frame
  std::vector<PixelCoord> pixels; // one per point

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

struct RenderOptions {
  RasterOptions raster;
  std::uint64_t seed = 0;
  bool noise = true;
};

/// Everything produced for one frame; `scan` is the published output.
struct RenderedFrame {
  DepthImage depth;
  PatternMask mask;
  ScanCloud scan;
};

/// Transient points rendered on top of the static map (obstacles, peer vehicles).
struct Overlay {
  PointList points;
  double resolution = 0.1;
};

/// Renders scans for one sensor model. Reentrant: no state changes after construction.
class ScanRenderer {
public:
  ScanRenderer(const SensorModel& model, RenderOptions options = {})
      : rasterizer_(model, options.raster), options_(options) {
    model.validate();
  }

  const SensorModel& model() const { return rasterizer_.model(); }
  const RenderOptions& options() const { return options_; }

  DepthImage depth(const PointMap& map, const Overlay* overlay, const Pose& sensor_pose) const {
    const auto candidates = frustum_cull(map, sensor_pose, model());
    std::vector<PointSource> sources;
    if (!map.empty()) sources.push_back(map_source(map, candidates));
    if (overlay && !overlay->points.empty()) {
      PointSource s;
      s.points = overlay->points;
      s.resolution = overlay->resolution;
      sources.push_back(s);
    }
    return rasterizer_.rasterize(sources, sensor_pose);
  }

  RenderedFrame render_frame(const PointMap& map, const Overlay* overlay, const Pose& sensor_pose, double t) const {
    const auto& m = model();
    RenderedFrame frame;
    frame.depth = depth(map, overlay, sensor_pose);
    frame.mask = generate_pattern_mask(m, t, 1.0 / m.scan_rate);
    frame.scan.timestamp = t;
    Rng rng = make_rng(options_.seed ^ m.noise.stream, std::bit_cast<std::uint64_t>(t));
    const auto& rays = rasterizer_.rays();
    for (int v = 0; v < m.height; ++v) {
      for (int u = 0; u < m.width; ++u) {
        if (!frame.mask.at(u, v) || !frame.depth.is_valid(u, v)) continue;
        double r = frame.depth.at(u, v);
        if (options_.noise) r = apply_range_noise(r, m.noise, rng, m.min_range);
        r = std::clamp(r, m.min_range, m.max_range);
        frame.scan.points.push_back(rays.at(u, v) * r);
        frame.scan.pixels.push_back({u, v});
      }
    }
    return frame;
  }

  ScanCloud render_scan(const PointMap& map, const Overlay* overlay, const Pose& sensor_pose, double t) const {
    return render_frame(map, overlay, sensor_pose, t).scan;
  }

private:
  Rasterizer rasterizer_;
  RenderOptions options_;
};

}  // namespace lidarsim
