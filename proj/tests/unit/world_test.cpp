#include "lidarsim/sensors/catalog.hpp"
#include "lidarsim/world/world_state.hpp"
#include "support/collision_oracle.hpp"
#include "support/gen.hpp"

#include <gtest/gtest.h>

#include <cstring>

using namespace lidarsim;
using testsupport::Gen;

namespace {

ObstacleConfig box_config(std::size_t count) {
  ObstacleConfig c;
  c.count = count;
  c.bounds.min = Vec3(-5, -5, 0);
  c.bounds.max = Vec3(5, 5, 4);
  return c;
}

double ks_uniform(std::vector<double> xs, double lo, double hi) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = (xs[i] - lo) / (hi - lo);
    d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
  }
  return d;
}

std::shared_ptr<const PointMap> cloud_map(const PointList& pts) {
  return std::make_shared<const PointMap>(PointMap::from_parts(
      0.1, 2.0, pts, std::vector<Vec3>(pts.size(), Vec3::UnitZ()), std::vector<double>(pts.size(), kInf)));
}

}  // namespace

// ---------------------------------------------------------------------------
// obstacles

TEST(Obstacles, EmptyAndValidation) {
  EXPECT_TRUE(spawn_obstacles(box_config(0), make_rng(1)).empty());
  ObstacleConfig flat = box_config(3);
  flat.bounds.max.z() = flat.bounds.min.z();
  EXPECT_THROW(spawn_obstacles(flat, make_rng(1)), ParameterError);
  ObstacleConfig bad = box_config(3);
  bad.radius_max = 0.1;
  EXPECT_THROW(spawn_obstacles(bad, make_rng(1)), ParameterError);
  bad = box_config(3);
  bad.speed_min = -1;
  EXPECT_THROW(spawn_obstacles(bad, make_rng(1)), ParameterError);
}

TEST(Obstacles, SeededDeterminism) {
  const auto a = spawn_obstacles(box_config(20), make_rng(7));
  const auto b = spawn_obstacles(box_config(20), make_rng(7));
  const auto c = spawn_obstacles(box_config(20), make_rng(8));
  ASSERT_EQ(a.size(), 20u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.obstacles[i].center, b.obstacles[i].center);
    EXPECT_EQ(a.obstacles[i].velocity, b.obstacles[i].velocity);
    EXPECT_EQ(a.obstacles[i].radius, b.obstacles[i].radius);
  }
  EXPECT_NE(a.obstacles[0].center, c.obstacles[0].center);
}

TEST(Obstacles, SpawnDistributions) {
  ObstacleConfig cfg = box_config(10000);
  cfg.spacing = 1.0;  // few surface points; only the draws matter here
  const auto set = spawn_obstacles(cfg, make_rng(11));
  Vec3 dir_sum = Vec3::Zero();
  for (int a = 0; a < 3; ++a) {
    std::vector<double> xs;
    for (const auto& o : set.obstacles) xs.push_back(o.center[a]);
    EXPECT_LT(ks_uniform(xs, cfg.bounds.min[a], cfg.bounds.max[a]), 0.02) << "axis " << a;
  }
  std::vector<double> radii, speeds;
  for (const auto& o : set.obstacles) {
    radii.push_back(o.radius);
    speeds.push_back(o.velocity.norm());
    dir_sum += o.velocity.normalized();
  }
  EXPECT_LT(ks_uniform(radii, cfg.radius_min, cfg.radius_max), 0.02);
  EXPECT_LT(ks_uniform(speeds, cfg.speed_min, cfg.speed_max), 0.02);
  EXPECT_LT((dir_sum / 10000.0).norm(), 0.03);
  std::vector<double> cz;
  for (const auto& o : set.obstacles) cz.push_back(o.velocity.normalized().z());
  // Uniform directions on the sphere have a uniform z component.
  EXPECT_LT(ks_uniform(cz, -1.0, 1.0), 0.02);
}

TEST(Obstacles, SurfacePointsOnSphere) {
  const auto set = spawn_obstacles(box_config(10), make_rng(3));
  for (const auto& o : set.obstacles) {
    EXPECT_GE(o.surface_points.size(), 12u);
    EXPECT_GE(o.surface_points.size(), std::floor(4 * kPi * o.radius * o.radius / 0.01));
    for (const auto& p : o.surface_points) EXPECT_NEAR((p - o.center).norm(), o.radius, 1e-6);
  }
}

TEST(Obstacles, StepMovesByVelocity) {
  auto set = spawn_obstacles(box_config(1), make_rng(2));
  auto& o = set.obstacles[0];
  o.translate(Vec3::Zero() - o.center);
  o.velocity = Vec3(1, 0, 0);
  o.center.z() = 2.0;
  for (auto& p : o.surface_points) p.z() += 2.0;
  const PointList before = o.surface_points;
  step_obstacles(set, 0.1);
  EXPECT_NEAR(set.obstacles[0].center.x(), 0.1, 1e-15);
  EXPECT_EQ(set.respawns, 0u);
  for (std::size_t i = 0; i < before.size(); ++i)
    EXPECT_LE((set.obstacles[0].surface_points[i] - before[i] - Vec3(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_THROW(step_obstacles(set, 0.0), ParameterError);
}

TEST(Obstacles, RespawnAtBoundary) {
  auto set = spawn_obstacles(box_config(3), make_rng(4));
  auto& o = set.obstacles[1];
  o.translate(Vec3(4.95, 0, 2) - o.center);
  o.velocity = Vec3(1, 0, 0);
  step_obstacles(set, 0.1);
  EXPECT_EQ(set.size(), 3u);
  EXPECT_EQ(set.respawns, 1u);
  EXPECT_TRUE(set.config.bounds.contains(set.obstacles[1].center));
  EXPECT_NE(set.obstacles[1].velocity, Vec3(1, 0, 0));
}

TEST(Obstacles, LongRunStaysInBoundsAndDeterministic) {
  ObstacleConfig cfg = box_config(15);
  cfg.speed_min = 2.0;
  cfg.speed_max = 5.0;
  auto a = spawn_obstacles(cfg, make_rng(5)), b = spawn_obstacles(cfg, make_rng(5));
  for (int k = 0; k < 10000; ++k) {
    step_obstacles(a, 0.05);
    step_obstacles(b, 0.05);
    ASSERT_EQ(a.size(), 15u);
    for (const auto& o : a.obstacles) ASSERT_TRUE(cfg.bounds.contains(o.center)) << "step " << k;
  }
  EXPECT_GT(a.respawns, 100u);
  EXPECT_EQ(a.respawns, b.respawns);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.obstacles[i].center, b.obstacles[i].center);
}

TEST(Obstacles, KeepOutAroundVehicles) {
  ObstacleConfig cfg = box_config(200);
  cfg.keep_out = 1.5;
  cfg.spacing = 1.0;
  const Vec3 uav(0, 0, 2);
  const auto set = spawn_obstacles(cfg, make_rng(6), std::span<const Vec3>(&uav, 1));
  for (const auto& o : set.obstacles) EXPECT_GE((o.center - uav).norm(), 1.5);
}

// ---------------------------------------------------------------------------
// collision

TEST(Collision, FarAwayIsClear) {
  const auto map = cloud_map({Vec3(10, 0, 0), Vec3(0, 10, 0)});
  const auto r = check_collision(map->tree(), nullptr, Vec3::Zero(), 0.3);
  EXPECT_FALSE(r.colliding);
  EXPECT_EQ(r.offender, Offender::None);
  EXPECT_NEAR(r.nearest_distance, 10.0, 1e-12);
}

TEST(Collision, BoundaryInclusive) {
  const auto map = cloud_map({Vec3(0.25, 0, 0)});
  const auto r = check_collision(map->tree(), nullptr, Vec3(0.0, 0, 0), 0.25);
  EXPECT_TRUE(r.colliding);
  EXPECT_EQ(r.nearest_distance, 0.25);
  EXPECT_EQ(r.offender, Offender::StaticMap);
  EXPECT_EQ(r.contact_point, Vec3(0.25, 0, 0));
  EXPECT_FALSE(check_collision(map->tree(), nullptr, Vec3::Zero(), std::nextafter(0.25, 0.0)).colliding);
}

TEST(Collision, ObstacleOffenderAndTies) {
  const auto map = cloud_map({Vec3(1, 0, 0)});
  const PointList obs = {Vec3(-0.2, 0, 0)};
  const KdIndex tree(obs);
  const auto r = check_collision(map->tree(), &tree, Vec3::Zero(), 0.3);
  EXPECT_TRUE(r.colliding);
  EXPECT_EQ(r.offender, Offender::Obstacle);
  const PointList tie = {Vec3(-1, 0, 0)};
  const KdIndex ttree(tie);
  EXPECT_EQ(check_collision(map->tree(), &ttree, Vec3::Zero(), 1.0).offender, Offender::StaticMap);
  const auto none = check_collision(nullptr, nullptr, Vec3::Zero(), 0.3);
  EXPECT_FALSE(none.colliding);
  EXPECT_EQ(none.nearest_distance, kInf);
  EXPECT_THROW(check_collision(nullptr, nullptr, Vec3::Zero(), 0.0), ParameterError);
}

TEST(Collision, PropertyMatchesBruteForce) {
  const auto st = testsupport::run_collision_trials(1000, 51);
  EXPECT_EQ(st.trials, 1000u);
  EXPECT_EQ(st.flag_mismatches, 0u);
  EXPECT_EQ(st.offender_mismatches, 0u);
  EXPECT_LE(st.max_distance_error, 1e-9);
  EXPECT_GT(st.colliding, 200u);
  EXPECT_LT(st.colliding, 800u);
}

// ---------------------------------------------------------------------------
// peer surface

TEST(UavSurface, CoarseGridIsCorners) {
  PeerPose p;
  p.size = 0.3;
  const auto pts = sample_uav_surface(p, 0.3);
  ASSERT_EQ(pts.size(), 8u);
  for (const auto& q : pts) EXPECT_NEAR(q.cwiseAbs().minCoeff(), 0.15, 1e-15);
}

TEST(UavSurface, IdentityPoseOnCubeSurface) {
  for (double spacing : {0.3, 0.1, 0.07, 0.05}) {
    PeerPose p;
    p.size = 0.3;
    const auto pts = sample_uav_surface(p, spacing);
    const int n = static_cast<int>(std::ceil(0.3 / spacing - 1e-9));
    EXPECT_EQ(pts.size(), static_cast<std::size_t>(6 * n * n + 2)) << spacing;
    std::array<int, 6> faces{};
    for (const auto& q : pts) {
      ASSERT_NEAR(q.cwiseAbs().maxCoeff(), 0.15, 1e-12);
      for (int a = 0; a < 3; ++a) {
        if (std::abs(q[a] - 0.15) < 1e-12) ++faces[2 * a];
        if (std::abs(q[a] + 0.15) < 1e-12) ++faces[2 * a + 1];
      }
    }
    for (int f : faces) EXPECT_GE(f, 4);
  }
  EXPECT_THROW(sample_uav_surface(PeerPose{}, 0.0), ParameterError);
}

TEST(UavSurface, RigidTransform) {
  Gen g(52);
  for (int trial = 0; trial < 50; ++trial) {
    PeerPose id;
    id.size = g.uniform(0.1, 1.0);
    const double spacing = g.uniform(0.03, 0.3);
    PeerPose moved = id;
    moved.pose = trial == 0 ? Pose{Vec3::Zero(), Quat(Eigen::AngleAxisd(kPi / 2, Vec3::UnitZ()))}
                            : Pose{g.point_in(Vec3::Constant(-5), Vec3::Constant(5)), g.rotation()};
    const auto a = sample_uav_surface(id, spacing), b = sample_uav_surface(moved, spacing);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_LE((moved.pose.to_map(a[i]) - b[i]).norm(), 1e-9);
  }
}

// ---------------------------------------------------------------------------
// world step

TEST(WorldStep, EmptyWorldOnlyAdvancesClock) {
  const auto map = cloud_map({Vec3(1, 1, 1)});
  WorldState w = make_world(map, spawn_obstacles(box_config(0), make_rng(1)));
  world_step(w, 0.25, {});
  EXPECT_EQ(w.time, 0.25);
  EXPECT_TRUE(w.overlay.points.empty());
  EXPECT_EQ(w.obstacle_tree, nullptr);
  EXPECT_EQ(w.map, map);
  EXPECT_THROW(world_step(w, 0.0, {}), ParameterError);
}

TEST(WorldStep, PeerInFovIsObserved) {
  const auto map = cloud_map({Vec3(25, 0, 0)});
  WorldState w = make_world(map, spawn_obstacles(box_config(0), make_rng(1)));
  const ScanRenderer renderer(builtin_sensor("AVIA"), RenderOptions{RasterOptions{}, 1, false});
  const Pose own = Pose::from_yaw(Vec3(0, 0, 1), 0.0);
  const double half_diag = std::sqrt(3.0) / 2.0 * 0.3;
  for (double yaw : {0.0, kPi}) {
    PeerPose peer;
    peer.id = 2;
    peer.size = 0.3;
    peer.pose = Pose::from_yaw(own.to_map(Vec3(std::cos(yaw) * 4.0, std::sin(yaw) * 4.0, 0.0)), 0.3);
    world_step(w, 0.1, {peer});
    const auto scan = render_scan(w, renderer, own);
    std::size_t near = 0;
    for (const auto& p : scan.points) near += (own.to_map(p) - peer.pose.position).norm() <= half_diag;
    if (yaw == 0.0) EXPECT_GE(near, 1u);
    else EXPECT_EQ(near, 0u);
    EXPECT_EQ(w.overlay.points.size(), sample_uav_surface(peer, map->resolution()).size());
  }
}

TEST(WorldStep, ObstacleOutsideFovStaysInOverlay) {
  const auto map = cloud_map({Vec3(25, 0, 0)});
  auto set = spawn_obstacles(box_config(1), make_rng(9));
  set.obstacles[0].translate(Vec3(-3, 0, 2) - set.obstacles[0].center);
  set.obstacles[0].velocity = Vec3(-0.1, 0, 0);
  WorldState w = make_world(map, set);
  world_step(w, 0.1, {});
  EXPECT_EQ(w.overlay.points.size(), w.obstacles.obstacles[0].surface_points.size());
  ASSERT_NE(w.obstacle_tree, nullptr);
  const ScanRenderer renderer(builtin_sensor("AVIA"), RenderOptions{RasterOptions{}, 1, false});
  const auto scan = render_scan(w, renderer, Pose{Vec3(0, 0, 2), Quat::Identity()});
  for (const auto& p : scan.points) EXPECT_GT(p.x(), 0.0);
}

TEST(WorldStep, StaticMapNeverMutated) {
  Gen g(53);
  const PointList pts = g.cloud(5000, Vec3(-5, -5, 0), Vec3(5, 5, 4));
  const auto map = cloud_map(pts);
  const PointList before = map->points();
  const auto normals = map->normals();
  WorldState w = make_world(map, spawn_obstacles(box_config(10), make_rng(10)));
  PeerPose peer;
  peer.id = 1;
  for (int k = 0; k < 200; ++k) {
    peer.pose.position = g.point_in(Vec3(-4, -4, 0), Vec3(4, 4, 3));
    world_step(w, 0.05, {peer});
  }
  ASSERT_EQ(map->points().size(), before.size());
  EXPECT_EQ(std::memcmp(map->points().data(), before.data(), before.size() * sizeof(Vec3)), 0);
  EXPECT_EQ(std::memcmp(map->normals().data(), normals.data(), normals.size() * sizeof(Vec3)), 0);
  EXPECT_EQ(w.map.get(), map.get());
}

TEST(WorldStep, CollisionSeesObstacles) {
  const auto map = cloud_map({Vec3(25, 0, 0)});
  auto set = spawn_obstacles(box_config(1), make_rng(12));
  set.obstacles[0].translate(Vec3(1, 0, 2) - set.obstacles[0].center);
  set.obstacles[0].velocity = Vec3(-1, 0, 0);
  WorldState w = make_world(map, set);
  const Vec3 uav(0, 0, 2);
  const double r = w.obstacles.obstacles[0].radius;
  bool hit = false;
  for (int k = 0; k < 20 && !hit; ++k) {
    world_step(w, 0.05, {});
    const auto rep = w.check_collision(uav, 0.3);
    hit = rep.colliding;
    if (hit) {
      EXPECT_EQ(rep.offender, Offender::Obstacle);
      EXPECT_LE((w.obstacles.obstacles[0].center - uav).norm(), r + 0.3 + 1e-9);
    }
  }
  EXPECT_TRUE(hit);
}

// ---------------------------------------------------------------------------
// mailbox

TEST(Mailbox, LatestWins) {
  PeerMailbox box;
  PeerPose p;
  p.id = 3;
  p.timestamp = 2.0;
  p.pose.position = Vec3(2, 0, 0);
  EXPECT_TRUE(box.offer(p));
  PeerPose old = p;
  old.timestamp = 1.0;
  old.pose.position = Vec3(1, 0, 0);
  EXPECT_FALSE(box.offer(old));
  EXPECT_FALSE(box.offer(p));  // same timestamp
  EXPECT_EQ(box.get(3)->pose.position, Vec3(2, 0, 0));
  EXPECT_FALSE(box.get(4).has_value());
}

TEST(Mailbox, StalenessOnLocalClock) {
  PeerMailbox box;
  box.set_local_time(10.0);
  PeerPose a, b;
  a.id = 1;
  a.timestamp = 1000.0;  // sender clock unrelated to ours
  b.id = 2;
  b.timestamp = 0.5;
  box.offer(a);
  box.set_local_time(10.3);
  box.offer(b);
  EXPECT_EQ(box.fresh(10.4).size(), 2u);
  ASSERT_EQ(box.fresh(10.6).size(), 1u);
  EXPECT_EQ(box.fresh(10.6)[0].id, 2u);
  EXPECT_TRUE(box.fresh(10.9).empty());
  box.set_local_time(11.0);
  a.timestamp = 1001.0;
  box.offer(a);
  EXPECT_EQ(box.fresh(11.2).size(), 1u);
  EXPECT_EQ(box.size(), 2u);
}

TEST(Mailbox, PropertyNeverAdoptsOlderPose) {
  Gen g(54);
  PeerMailbox box;
  std::map<std::uint32_t, double> newest;
  for (int k = 0; k < 5000; ++k) {
    PeerPose p;
    p.id = static_cast<std::uint32_t>(g.integer(0, 4));
    p.timestamp = g.uniform(0.0, 100.0);
    const bool accepted = box.offer(p);
    auto it = newest.find(p.id);
    const bool should = it == newest.end() || p.timestamp > it->second;
    ASSERT_EQ(accepted, should);
    if (should) newest[p.id] = p.timestamp;
    ASSERT_EQ(box.get(p.id)->timestamp, newest[p.id]);
  }
}
