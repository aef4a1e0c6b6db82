#include "lidarsim/renderer/render.hpp"
#include "lidarsim/scene/scene.hpp"
#include "lidarsim/sensors/catalog.hpp"
#include "support/gen.hpp"
#include "support/raycast.hpp"

#include <gtest/gtest.h>

using namespace lidarsim;
using testsupport::Gen;

namespace {

SensorModel narrow_model(int w, int h, double res) {
  SensorModel m;
  m.fov_h = w * res;
  m.fov_v = h * res;
  m.width = w;
  m.height = h;
  m.min_range = 0.1;
  m.max_range = 30.0;
  m.pattern.kind = PatternKind::FullRaster;
  return m;
}

RasterOptions flat_options(RenderBackend b = RenderBackend::Sequential) {
  RasterOptions o;
  o.plane_correction = false;
  o.backend = b;
  return o;
}

PointSource flat_source(const PointList& pts, double resolution) {
  PointSource s;
  s.points = pts;
  s.resolution = resolution;
  return s;
}

/// Brute-force flat-fill depth: for every pixel, the minimum range over points whose
/// footprint cone contains the pixel ray, plus each point's own pixel.
DepthImage oracle_flat(const PointList& pts, double resolution, const Pose& pose, const SensorModel& m) {
  std::vector<double> best(m.pixel_count(), kInf);
  for (const auto& p : pts) {
    const Vec3 q = pose.to_local(p);
    const double d = q.norm();
    if (!(d > 0.0)) continue;
    const double s = 0.5 * std::sqrt(3.0) * resolution / d;
    const double theta = s >= 1.0 ? kPi / 2 : std::atan2(s, std::sqrt(1.0 - s * s));
    const auto own = project_to_pixel(m, q);
    for (int v = 0; v < m.height; ++v)
      for (int u = 0; u < m.width; ++u) {
        const Vec3 ray = pixel_to_ray(m, u, v);
        const double angle = std::atan2(ray.cross(q).norm(), ray.dot(q));
        const bool mine = own && own->u == u && own->v == v;
        if (angle <= theta || mine) {
          auto& b = best[static_cast<std::size_t>(v) * m.width + u];
          b = std::min(b, d);
        }
      }
  }
  DepthImage img(m.width, m.height);
  for (std::size_t i = 0; i < best.size(); ++i) {
    if (best[i] == kInf) continue;
    const double r = static_cast<float>(best[i]);
    if (r < m.min_range || r > m.max_range) continue;
    img.range[i] = r;
    img.valid[i] = 1;
  }
  return img;
}

/// Pixels where the two images disagree in validity or range.
std::size_t mismatches(const DepthImage& a, const DepthImage& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.range.size(); ++i) n += a.valid[i] != b.valid[i] || (a.valid[i] && a.range[i] != b.range[i]);
  return n;
}

PointMap grid_wall_map(double x, double half, double spacing, double voxel_edge = 2.0) {
  RawCloud c;
  const int n = static_cast<int>(std::lround(2 * half / spacing));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c.points.emplace_back(x, -half + (i + 0.5) * spacing, -half + (j + 0.5) * spacing);
  MapParams p;
  p.resolution = spacing;
  p.voxel_edge = voxel_edge;
  p.downsample = false;
  return PointMap::build(c, p, 1);
}

}  // namespace

// ---------------------------------------------------------------------------
// interpolation radius

TEST(InterpolationRadius, Example) {
  EXPECT_NEAR(interpolation_radius(0.1, 10.0), 8.6603e-3, 1e-7);
}

TEST(InterpolationRadius, GridAgainstClosedForm) {
  for (double r = 0.01; r <= 1.0; r += 0.01)
    for (double d = 0.01; d <= 100.0; d *= 1.1) {
      const double s = std::sqrt(3.0) / 2.0 * r / d;
      const double want = s >= 1.0 ? kPi / 2 : std::atan2(s, std::sqrt(1.0 - s * s));
      ASSERT_NEAR(interpolation_radius(r, d), want, 1e-12) << r << " " << d;
    }
}

TEST(InterpolationRadius, ClampsAndDecreases) {
  EXPECT_EQ(interpolation_radius(0.1, 0.05), kPi / 2);
  EXPECT_EQ(interpolation_radius(0.1, std::sqrt(3.0) / 2 * 0.1), kPi / 2);
  double prev = kPi / 2;
  for (double d = 0.01; d < 50.0; d += 0.01) {
    const double t = interpolation_radius(0.1, d);
    ASSERT_LE(t, prev);
    prev = t;
  }
  EXPECT_THROW(interpolation_radius(0.0, 1.0), ParameterError);
  EXPECT_THROW(interpolation_radius(0.1, -1.0), ParameterError);
  EXPECT_THROW(interpolation_radius(0.1, 0.0), ParameterError);
}

TEST(InterpolationRadius, MaxDistanceMatchesOnePixel) {
  const double dmax = max_interpolation_distance(0.1, 0.002);
  EXPECT_NEAR(interpolation_radius(0.1, dmax), 0.002, 1e-12);
}

// ---------------------------------------------------------------------------
// plane correction

TEST(PlaneCorrection, Examples) {
  EXPECT_NEAR(*plane_correct_depth(Vec3::UnitX(), Vec3(10, 0, 0), Vec3::UnitX()), 10.0, 1e-12);
  EXPECT_NEAR(*plane_correct_depth(Vec3(1, 1, 0).normalized(), Vec3(10, 0, 0), Vec3::UnitX()), 14.142, 1e-3);
  EXPECT_FALSE(plane_correct_depth(Vec3::UnitY(), Vec3(10, 0, 0), Vec3::UnitX()).has_value());
  EXPECT_FALSE(plane_correct_depth(Vec3(1e-4, 1, 0).normalized(), Vec3(10, 0, 0), Vec3::UnitX()).has_value());
  EXPECT_NEAR(*plane_correct_depth(Vec3(0.01, 1, 0).normalized(), Vec3(10, 0, 0), Vec3::UnitX()),
              10.0 / Vec3(0.01, 1, 0).normalized().x(), 1e-9);
}

TEST(PlaneCorrection, ObliqueWallBeatsFlatFill) {
  // Wall x = 10 seen through rays up to ~7 deg off axis: flat fill reports the
  // point range; correction reaches the plane.
  const PointMap map = grid_wall_map(10.0, 3.0, 0.1);
  const auto m = narrow_model(120, 120, 0.002);
  const Pose pose;
  RasterOptions on, off = flat_options();
  const auto cands = frustum_cull(map, pose, m);
  const auto a = rasterize_depth(cands, map, pose, m, on);
  const auto b = rasterize_depth(cands, map, pose, m, off);
  double ea = 0, eb = 0;
  std::size_t n = 0;
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      if (!a.is_valid(u, v) || !b.is_valid(u, v)) continue;
      const double truth = 10.0 / pixel_to_ray(m, u, v).x();
      ea += std::abs(a.at(u, v) - truth);
      eb += std::abs(b.at(u, v) - truth);
      ++n;
    }
  ASSERT_GT(n, 0.9 * m.pixel_count());
  EXPECT_LT(ea / n, 1e-4);
  EXPECT_LT(ea, eb);
  EXPECT_GT(a.valid_count(), 0u);
  std::size_t corrected = 0;
  for (auto c : a.plane_corrected) corrected += c;
  EXPECT_GT(corrected, 0.9 * a.valid_count());
}

// ---------------------------------------------------------------------------
// frustum culling

TEST(FrustumCull, AheadKeptBehindDropped) {
  const auto map = PointMap::from_parts(0.1, 1.0, {Vec3(5, 0, 0), Vec3(-5, 0, 0), Vec3(5, 0, 28)},
                                        std::vector<Vec3>(3, Vec3::UnitX()), std::vector<double>(3, 0.0));
  const auto idx = frustum_cull(map, Pose{}, builtin_sensor("AVIA"));
  EXPECT_NE(std::find(idx.begin(), idx.end(), 0u), idx.end());
  EXPECT_EQ(std::find(idx.begin(), idx.end(), 1u), idx.end());
  EXPECT_EQ(std::find(idx.begin(), idx.end(), 2u), idx.end());
}

TEST(FrustumCull, PropertySupersetOfVisiblePoints) {
  Gen g(31);
  for (int trial = 0; trial < 20; ++trial) {
    const PointList pts = g.cloud(4000, Vec3(-40, -40, -10), Vec3(40, 40, 10));
    const auto map = PointMap::from_parts(0.1, g.uniform(0.5, 6.0), pts, std::vector<Vec3>(pts.size(), Vec3::UnitZ()),
                                          std::vector<double>(pts.size(), kInf));
    const char* names[] = {"AVIA", "VLP32", "D455", "MID360"};
    const auto m = builtin_sensor(names[trial % 4]);
    const Pose pose{g.point_in(Vec3(-5, -5, -1), Vec3(5, 5, 1)), g.rotation()};
    const auto idx = frustum_cull(map, pose, m);
    std::vector<std::uint8_t> in(pts.size(), 0);
    for (auto i : idx) in[i] = 1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const Vec3 q = pose.to_local(pts[i]);
      // A point whose disc can touch any FoV pixel must survive the cull.
      const double d = q.norm();
      if (d > m.max_range) continue;
      if (angle_outside_fov(m, q / d) > interpolation_radius(0.1, d)) continue;
      EXPECT_TRUE(in[i]) << "trial " << trial << " point " << i;
    }
  }
}

TEST(FrustumCull, AngleOutsideFovIsZeroInside) {
  const auto m = builtin_sensor("AVIA");
  for (int v = 0; v < m.height; v += 7)
    for (int u = 0; u < m.width; u += 7) EXPECT_EQ(angle_outside_fov(m, pixel_to_ray(m, u, v)), 0.0);
  EXPECT_NEAR(angle_outside_fov(m, Vec3(0, 0, 1)), kPi / 2 - m.fov_v / 2, 1e-12);
}

// ---------------------------------------------------------------------------
// rasterization

TEST(Raster, SinglePointDiscFill) {
  const auto m = narrow_model(101, 101, 0.002);
  const PointList pts = {Vec3(10, 0, 0)};
  const auto src = flat_source(pts, 0.1);
  const auto img = Rasterizer(m, flat_options()).rasterize(std::span(&src, 1), Pose{});
  const double theta = interpolation_radius(0.1, 10.0);
  std::size_t inside = 0;
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      const Vec3 ray = pixel_to_ray(m, u, v);
      const bool cover = std::acos(std::min(1.0, ray.x())) <= theta;
      inside += cover;
      EXPECT_EQ(img.is_valid(u, v), cover) << u << "," << v;
      if (cover) {
        EXPECT_NEAR(img.at(u, v), 10.0, 1e-6);
      }
    }
  // Disc of radius theta / res ~ 4.33 px.
  EXPECT_NEAR(static_cast<double>(inside), kPi * std::pow(theta / 0.002, 2), 8.0);
}

TEST(Raster, MinRuleTwoPoints) {
  const auto m = narrow_model(41, 41, 0.002);
  const PointList pts = {Vec3(15, 0, 0), Vec3(5, 0, 0)};
  const auto src = flat_source(pts, 0.1);
  const auto img = Rasterizer(m, flat_options()).rasterize(std::span(&src, 1), Pose{});
  EXPECT_NEAR(img.at(20, 20), 5.0, 1e-6);
  // 15 m footprint is narrower, the 5 m one covers it completely.
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u)
      if (img.is_valid(u, v)) {
        EXPECT_NEAR(img.at(u, v), 5.0, 1e-6);
      }
}

TEST(Raster, PropertyMatchesBruteForce) {
  Gen g(32);
  std::size_t total_bad = 0, total = 0;
  for (int trial = 0; trial < 40; ++trial) {
    SensorModel m;
    switch (trial % 3) {
      case 0: m = narrow_model(g.integer(10, 60), g.integer(10, 40), g.uniform(0.002, 0.02)); break;
      case 1:
        m = narrow_model(g.integer(30, 90), g.integer(8, 30), 0.01);
        m.fov_h = 2 * kPi;
        m.fov_v = g.uniform(0.2, 1.5);
        break;
      default:
        m = narrow_model(g.integer(10, 60), g.integer(10, 40), 0.01);
        m.projection = Projection::Pinhole;
        m.fov_h = g.uniform(0.3, 2.0);
        m.fov_v = g.uniform(0.3, 1.5);
        break;
    }
    m.min_range = g.uniform(0.05, 0.5);
    m.max_range = g.uniform(5.0, 20.0);
    const double res = g.uniform(0.02, 0.3);
    const PointList pts = g.cloud(g.integer(1, 150), Vec3(-12, -12, -4), Vec3(12, 12, 4));
    const Pose pose{g.point_in(Vec3(-1, -1, -1), Vec3(1, 1, 1)), g.rotation()};
    const auto src = flat_source(pts, res);
    const auto img = Rasterizer(m, flat_options()).rasterize(std::span(&src, 1), pose);
    const auto want = oracle_flat(pts, res, pose, m);
    total_bad += mismatches(img, want);
    total += m.pixel_count();
    EXPECT_EQ(mismatches(img, want), 0u) << "trial " << trial;
  }
  EXPECT_EQ(total_bad, 0u) << total;
}

TEST(Raster, PropertyMinRuleMonotone) {
  Gen g(33);
  const auto m = narrow_model(80, 60, 0.005);
  for (int trial = 0; trial < 30; ++trial) {
    const PointList a = g.cloud(200, Vec3(1, -3, -2), Vec3(20, 3, 2));
    PointList ab = a;
    const PointList b = g.cloud(200, Vec3(1, -3, -2), Vec3(20, 3, 2));
    ab.insert(ab.end(), b.begin(), b.end());
    const auto sa = flat_source(a, 0.1), sab = flat_source(ab, 0.1);
    const Rasterizer r(m, flat_options());
    const auto ia = r.rasterize(std::span(&sa, 1), Pose{});
    const auto iab = r.rasterize(std::span(&sab, 1), Pose{});
    for (std::size_t i = 0; i < ia.range.size(); ++i) {
      ASSERT_LE(iab.range[i], ia.range[i]);
      if (ia.valid[i]) {
        ASSERT_TRUE(iab.valid[i]);
      }
    }
  }
}

TEST(Raster, BackendsAgree) {
  Gen g(34);
  const PointList pts = g.cloud(30000, Vec3(-20, -20, -3), Vec3(20, 20, 3));
  const auto map = PointMap::from_parts(0.1, 3.0, pts, std::vector<Vec3>(pts.size(), Vec3::UnitZ()),
                                        std::vector<double>(pts.size(), 0.0));
  for (const char* name : {"AVIA", "VLP32"}) {
    const auto m = builtin_sensor(name);
    RasterOptions seq, par;
    seq.backend = RenderBackend::Sequential;
    par.backend = RenderBackend::Parallel;
    par.threads = 4;
    const Pose pose = Pose::from_yaw(Vec3(0.5, 0, 0), 0.3);
    const auto c = frustum_cull(map, pose, m);
    EXPECT_TRUE(rasterize_depth(c, map, pose, m, seq) == rasterize_depth(c, map, pose, m, par)) << name;
  }
}

TEST(Raster, BoxInFrontOfWallOccludes) {
  Scene scene;
  scene.resolution = 0.05;
  scene.primitives.push_back(RectPrim{Vec3(10, -4, -4), Vec3(0, 8, 0), Vec3(0, 0, 8)});
  scene.primitives.push_back(BoxPrim{Vec3(5, -0.5, -0.5), Vec3(6, 0.5, 0.5), false});
  const RawCloud cloud = sample_scene(scene);
  MapParams mp;
  mp.resolution = 0.05;
  mp.voxel_edge = 2.0;
  mp.downsample = false;
  const PointMap map = PointMap::build(cloud, mp, 1);
  const auto m = narrow_model(150, 150, 0.005);
  const Pose pose;
  ScanRenderer renderer(m, RenderOptions{RasterOptions{}, 0, false});
  const auto depth = renderer.depth(map, nullptr, pose);
  std::size_t box = 0, bad = 0, through = 0;
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      const Vec3 ray = pixel_to_ray(m, u, v);
      const double truth = testsupport::first_hit(scene, Vec3::Zero(), ray);
      if (truth == testsupport::kNoHit) continue;
      ASSERT_TRUE(depth.is_valid(u, v)) << u << "," << v;
      if (truth < 7.0) ++box;
      const double err = depth.at(u, v) - truth;
      if (err > 2 * mp.resolution) ++through;
      if (std::abs(err) > 2 * mp.resolution) ++bad;
    }
  EXPECT_GT(box, 1000u);
  EXPECT_EQ(through, 0u);
  EXPECT_LE(bad, m.pixel_count() / 100);
}

TEST(Raster, OverlaySphereAppearsAndReverts) {
  const PointMap map = grid_wall_map(10.0, 4.0, 0.1, 2.0);
  const auto m = narrow_model(100, 100, 0.005);
  ScanRenderer renderer(m, RenderOptions{RasterOptions{}, 0, false});
  const auto before = renderer.depth(map, nullptr, Pose{});
  Scene sphere;
  sphere.resolution = 0.05;
  sphere.primitives.push_back(SpherePrim{Vec3(5, 0, 0), 0.5});
  Overlay ov{sample_scene(sphere).points, 0.05};
  const auto with = renderer.depth(map, &ov, Pose{});
  // Overlay points are flat filled, so rays grazing the silhouette may report a
  // nearer rim point; none may see through to the wall.
  std::size_t hits = 0, good = 0;
  for (int v = 0; v < m.height; ++v)
    for (int u = 0; u < m.width; ++u) {
      const double truth = testsupport::first_hit(sphere, Vec3::Zero(), pixel_to_ray(m, u, v));
      if (truth == testsupport::kNoHit) continue;
      ++hits;
      EXPECT_LT(with.at(u, v), truth + 0.1);
      good += std::abs(with.at(u, v) - truth) <= 0.1;
    }
  EXPECT_GT(hits, 500u);
  EXPECT_GE(good, 0.9 * hits);
  const Overlay empty{{}, 0.05};
  EXPECT_TRUE(renderer.depth(map, &empty, Pose{}) == before);
  EXPECT_TRUE(renderer.depth(map, nullptr, Pose{}) == before);
}

TEST(Raster, EmptyMapRendersNothing) {
  const auto map = PointMap::from_parts(0.1, 5.0, {}, {}, {});
  const ScanRenderer renderer(builtin_sensor("AVIA"));
  EXPECT_TRUE(renderer.render_scan(map, nullptr, Pose{}, 0.0).empty());
}

// ---------------------------------------------------------------------------
// scans

TEST(Scan, RangesWithinSensorBoundsAndBackProject) {
  Gen g(35);
  const PointList pts = g.cloud(60000, Vec3(-35, -35, -5), Vec3(35, 35, 5));
  const auto map = PointMap::from_parts(0.1, 3.0, pts, std::vector<Vec3>(pts.size(), Vec3::UnitZ()),
                                        std::vector<double>(pts.size(), kInf));
  for (bool noise : {true, false}) {
    const auto m = builtin_sensor("AVIA");
    const ScanRenderer renderer(m, RenderOptions{RasterOptions{}, 9, noise});
    const auto frame = renderer.render_frame(map, nullptr, Pose{}, 0.2);
    ASSERT_FALSE(frame.scan.empty());
    ASSERT_EQ(frame.scan.points.size(), frame.scan.pixels.size());
    for (std::size_t i = 0; i < frame.scan.size(); ++i) {
      const Vec3& p = frame.scan.points[i];
      const auto [u, v] = frame.scan.pixels[i];
      ASSERT_GE(p.norm(), m.min_range - 1e-12);
      ASSERT_LE(p.norm(), m.max_range + 1e-12);
      ASSERT_TRUE(frame.mask.at(u, v));
      const auto px = project_to_pixel(m, p);
      ASSERT_TRUE(px.has_value());
      ASSERT_EQ(*px, (PixelCoord{u, v}));
      if (!noise) {
        ASSERT_NEAR(p.norm(), frame.depth.at(u, v), 1e-9);
      }
    }
  }
}

TEST(Scan, DeterministicForSeedAndTime) {
  Gen g(36);
  const PointList pts = g.cloud(20000, Vec3(-20, -20, -5), Vec3(20, 20, 5));
  const auto map = PointMap::from_parts(0.1, 3.0, pts, std::vector<Vec3>(pts.size(), Vec3::UnitZ()),
                                        std::vector<double>(pts.size(), kInf));
  const auto m = builtin_sensor("MID360");
  const ScanRenderer a(m, RenderOptions{RasterOptions{}, 4, true}), b(m, RenderOptions{RasterOptions{}, 4, true});
  const auto s1 = a.render_scan(map, nullptr, Pose{}, 1.5), s2 = b.render_scan(map, nullptr, Pose{}, 1.5);
  ASSERT_EQ(s1.size(), s2.size());
  for (std::size_t i = 0; i < s1.size(); ++i) ASSERT_EQ(s1.points[i], s2.points[i]);
  const auto s3 = a.render_scan(map, nullptr, Pose{}, 1.6);
  bool differs = s3.size() != s1.size();
  for (std::size_t i = 0; !differs && i < s1.size(); ++i) differs = s1.points[i] != s3.points[i];
  EXPECT_TRUE(differs);
}
