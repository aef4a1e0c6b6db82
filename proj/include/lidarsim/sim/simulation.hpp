#pragma once

// Closed-loop simulation of one vehicle. Physics runs at rates.physics; the
// IMU, odometry and LiDAR outputs are decimated from it on the simulated clock.
// Per IMU tick: world_step (obstacles, peers, overlay) and a collision check.

#include "lidarsim/pointmap/cloud_io.hpp"
#include "lidarsim/sim/config.hpp"
#include "lidarsim/sim/wire.hpp"
#include "lidarsim/world/world_state.hpp"

#include <chrono>
#include <iomanip>

namespace lidarsim {

/// Builds (or loads from cache) the map named by the config.
inline std::shared_ptr<const PointMap> load_map(const SimConfig& cfg) {
  MapParams mp;
  mp.resolution = cfg.map_resolution;
  mp.voxel_edge = cfg.voxel_edge;
  mp.plane_neighbors = static_cast<std::size_t>(cfg.plane_neighbors);
  if (!cfg.map_cache.empty() && std::filesystem::exists(cfg.map_cache)) {
    auto cached = read_map_cache(read_file_bytes(cfg.map_cache));
    if (cached.resolution() == mp.resolution && cached.voxels().edge == mp.voxel_edge)
      return std::make_shared<const PointMap>(std::move(cached));
  }
  RawCloud cloud;
  if (!cfg.map_generate.empty()) {
    GenParams g;
    g.kind = parse_map_kind(cfg.map_generate);
    g.resolution = cfg.map_resolution;
    g.size = cfg.map_size;
    g.objects = static_cast<std::size_t>(cfg.map_objects);
    g.seed = cfg.map_seed;
    cloud = sample_scene(generate_scene(g));
    mp.downsample = false;
  } else {
    const auto bytes = read_file_bytes(cfg.map_path);
    const CloudFormat fmt = cfg.map_format == "auto"  ? cloud_format_from_path(cfg.map_path)
                            : cfg.map_format == "ply" ? CloudFormat::PlyAscii
                            : cfg.map_format == "xyz" ? CloudFormat::XyzText
                                                      : CloudFormat::PcdBinary;
    cloud = parse_point_cloud(std::string_view(bytes), fmt).cloud;
  }
  auto map = std::make_shared<const PointMap>(PointMap::build(cloud, mp));
  if (!cfg.map_cache.empty()) write_file_bytes(cfg.map_cache, write_map_cache(*map));
  return map;
}

/// 64-bit FNV-1a over the float coordinates of a scan.
inline std::uint64_t scan_digest(const ScanMsg& scan) {
  std::uint64_t h = 1469598103934665603ull;
  for (float f : scan.points) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) {
      h ^= (bits >> (8 * i)) & 0xffu;
      h *= 1099511628211ull;
    }
  }
  return h;
}

/// Fires `rate` times per second of simulated time, driven by integer physics ticks.
class Decimator {
public:
  Decimator(double rate, double physics_rate) : ratio_(rate / physics_rate) {}
  bool due(std::uint64_t tick) {
    const auto n = static_cast<std::uint64_t>(std::floor(static_cast<double>(tick) * ratio_ + 1e-9));
    if (n <= fired_) return false;
    fired_ = n;
    return true;
  }

private:
  double ratio_;
  std::uint64_t fired_ = 0;
};

struct TickEvents {
  bool imu = false, odom = false, scan = false;
  std::optional<CollisionReport> collision;  // set on the tick a collision starts
};

class Simulation {
public:
  using Sink = std::function<void(const WireMessage&)>;

  explicit Simulation(const SimConfig& cfg, std::shared_ptr<const PointMap> map = nullptr)
      : cfg_(cfg), params_(cfg.uav_params()), gains_(cfg.gains(params_)), model_(cfg.sensor_model()),
        renderer_(model_, render_options(cfg)), imu_rng_(make_rng(cfg.seed, 2)),
        imu_(cfg.imu_noise(), imu_rng_, params_.gravity),
        quad_(params_, gains_, UavState::hovering(params_, cfg.start, cfg.start_yaw), cfg.control_rates(),
              1.0 / cfg.physics_rate),
        imu_tick_(cfg.imu_rate, cfg.physics_rate), odom_tick_(cfg.odom_rate, cfg.physics_rate),
        scan_tick_(cfg.lidar_rate, cfg.physics_rate) {
    if (!map) map = load_map(cfg);
    auto obstacles = spawn(cfg, map->bounds());
    world_ = make_world(std::move(map), std::move(obstacles));
  }

  const SimConfig& config() const { return cfg_; }
  const UavParams& params() const { return params_; }
  const SensorModel& sensor() const { return model_; }
  const ScanRenderer& renderer() const { return renderer_; }
  const WorldState& world() const { return world_; }
  const UavState& state() const { return quad_.state(); }
  double time() const { return quad_.state().time; }
  std::uint64_t ticks() const { return tick_; }
  const Setpoint& setpoint() const { return quad_.setpoint(); }
  bool colliding() const { return colliding_; }
  const ScanCloud& last_scan() const { return last_scan_; }
  double last_render_ms() const { return last_render_ms_; }

  void set_setpoint(const Setpoint& sp) { quad_.set_setpoint(sp); }
  void set_sink(Sink sink) { sink_ = std::move(sink); }
  /// Peer poses are read from `mailbox` at each world step (fresh ones only).
  void set_peer_mailbox(PeerMailbox* mailbox) { peers_ = mailbox; }

  Pose body_pose() const {
    Pose p;
    p.position = state().position;
    p.orientation = state().orientation;
    return p;
  }
  Pose sensor_pose() const { return body_pose().compose(cfg_.mount()); }

  PeerPose own_pose() const { return {cfg_.uav_id, body_pose(), params_.uav_size, time()}; }

  /// Advances one physics tick and emits whatever falls due.
  TickEvents step() {
    TickEvents ev;
    quad_.step();
    ++tick_;
    const double t = time();
    if (imu_tick_.due(tick_)) {
      ev.imu = true;
      std::vector<PeerPose> peers;
      if (peers_) {
        peers_->set_local_time(t);
        for (auto& p : peers_->fresh(t))
          if (p.id != cfg_.uav_id) peers.push_back(p);
      }
      const Vec3 vehicle = state().position;
      world_.time = t - 1.0 / cfg_.imu_rate;
      world_step(world_, 1.0 / cfg_.imu_rate, std::move(peers), std::span<const Vec3>(&vehicle, 1));
      world_.time = t;
      emit(make_imu(imu_.synthesize(state(), quad_.last_acceleration(), imu_rng_)));
      const auto report = world_.check_collision(vehicle, params_.uav_size);
      if (report.colliding && !colliding_) {
        ev.collision = report;
        emit(make_collision(t, report));
      }
      colliding_ = report.colliding;
    }
    if (odom_tick_.due(tick_)) {
      ev.odom = true;
      if (cfg_.ground_truth_odometry) emit(make_odom(state()));
    }
    if (scan_tick_.due(tick_)) {
      ev.scan = true;
      const auto t0 = std::chrono::steady_clock::now();
      last_scan_ = render_scan(world_, renderer_, sensor_pose());
      last_render_ms_ = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      if (sink_) emit(make_scan(last_scan_));
    }
    return ev;
  }

private:
  static RenderOptions render_options(const SimConfig& cfg) {
    RenderOptions o;
    o.seed = cfg.seed;
    o.noise = cfg.sensor_noise;
    o.raster.planarity_threshold = cfg.planarity_threshold;
    return o;
  }

  ObstacleSet spawn(const SimConfig& cfg, const AxisBox& map_bounds) const {
    ObstacleConfig oc;
    oc.count = static_cast<std::size_t>(cfg.obstacle_count);
    oc.radius_min = cfg.obstacle_radius_min;
    oc.radius_max = cfg.obstacle_radius_max;
    oc.speed_min = cfg.obstacle_speed_min;
    oc.speed_max = cfg.obstacle_speed_max;
    oc.spacing = cfg.map_resolution;
    oc.keep_out = 2.0 * params_.uav_size;
    if (cfg.obstacle_bounds_set()) {
      oc.bounds.min = cfg.obstacle_bounds_min;
      oc.bounds.max = cfg.obstacle_bounds_max;
    } else if (map_bounds.valid() && (map_bounds.max.array() > map_bounds.min.array()).all()) {
      oc.bounds = map_bounds;
    } else {
      oc.bounds.min = cfg.start - Vec3::Constant(5.0);
      oc.bounds.max = cfg.start + Vec3::Constant(5.0);
    }
    const Vec3 start = cfg.start;
    return spawn_obstacles(oc, make_rng(cfg.seed, 3), std::span<const Vec3>(&start, 1));
  }

  template <class M>
  void emit(const M& m) {
    if (sink_) sink_(WireMessage(m));
  }

  SimConfig cfg_;
  UavParams params_;
  ControllerGains gains_;
  SensorModel model_;
  ScanRenderer renderer_;
  Rng imu_rng_;
  ImuModel imu_;
  Quadrotor quad_;
  WorldState world_;
  Decimator imu_tick_, odom_tick_, scan_tick_;
  std::uint64_t tick_ = 0;
  bool colliding_ = false;
  Sink sink_;
  PeerMailbox* peers_ = nullptr;
  ScanCloud last_scan_;
  double last_render_ms_ = 0.0;
};

// ---------------------------------------------------------------------------
// Scripted runs

struct Waypoint {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double duration = 0.0;  // s; <= 0 uses sim.waypoint_time
};

/// Text waypoint list, one per line: "x y z [yaw] [duration]"; '#' starts a comment.
inline std::vector<Waypoint> parse_waypoints(std::string_view text) {
  std::vector<Waypoint> out;
  std::size_t pos = 0, line_start = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    line_start = pos;
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = detail::split_ws(line);
    if (!tok.empty()) {
      if (tok.size() < 3 || tok.size() > 5) throw ParseError(line_start, "expected 'x y z [yaw] [duration]'");
      double v[5] = {0, 0, 0, 0, 0};
      for (std::size_t i = 0; i < tok.size(); ++i)
        if (!detail::parse_double(tok[i], v[i])) throw ParseError(line_start, "bad number '" + std::string(tok[i]) + "'");
      out.push_back({Vec3(v[0], v[1], v[2]), v[3], v[4]});
    }
    if (end == text.size()) break;
  }
  return out;
}

struct TrajectorySample {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 velocity = Vec3::Zero();
};

struct CollisionEvent {
  double t = 0.0;
  Offender offender = Offender::None;
  double distance = 0.0;
  Vec3 position = Vec3::Zero();
};

struct RunReport {
  std::vector<TrajectorySample> trajectory;  // at the odometry rate
  std::vector<double> render_ms;             // per scan, wall clock
  std::vector<CollisionEvent> collisions;
  std::size_t scans = 0;
  bool aborted = false;  // stopped by fail_on_collision
  double duration = 0.0;
  Vec3 final_position = Vec3::Zero();
  std::string log;  // JSON lines; deterministic given (config, seed)

  std::string to_json() const {
    nlohmann::json j;
    j["duration"] = duration;
    j["aborted"] = aborted;
    j["scans"] = scans;
    j["final_position"] = detail::vec_to_json(final_position);
    j["render_ms"] = render_ms;
    auto& c = j["collisions"] = nlohmann::json::array();
    for (const auto& e : collisions)
      c.push_back({{"t", e.t}, {"offender", offender_name(e.offender)}, {"distance", e.distance},
                   {"position", detail::vec_to_json(e.position)}});
    auto& tr = j["trajectory"] = nlohmann::json::array();
    for (const auto& s : trajectory)
      tr.push_back({{"t", s.t}, {"p", detail::vec_to_json(s.position)}, {"q", detail::quat_to_json(s.orientation)},
                    {"v", detail::vec_to_json(s.velocity)}});
    return j.dump(1) + "\n";
  }
};

/// Log line for a scan: the full wire message when scan points are logged,
/// otherwise a summary with the point count and a digest of the coordinates.
inline std::string scan_log_line(const ScanMsg& m, bool with_points) {
  if (with_points) return encode_wire(m);
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << scan_digest(m);
  return nlohmann::json{{"type", "scan_info"}, {"t", m.t}, {"n", m.n()}, {"digest", hex.str()}}.dump() + "\n";
}

using Stepper = std::function<TickEvents(Simulation&)>;

/// Flies the waypoints in order, holding each for its duration. With
/// fail_on_collision the run stops at the first collision (report.aborted).
/// `stepper` replaces Simulation::step, e.g. to exchange peer poses.
inline RunReport run_scripted(Simulation& sim, const std::vector<Waypoint>& waypoints, const Stepper& stepper = {}) {
  if (waypoints.empty()) throw ParameterError("waypoints", "at least one waypoint is required");
  const auto& cfg = sim.config();
  RunReport report;
  std::string log;
  sim.set_sink([&](const WireMessage& m) {
    if (const auto* s = std::get_if<ScanMsg>(&m)) log += scan_log_line(*s, cfg.log_scan_points);
    else log += encode_wire(m);
  });
  for (const auto& wp : waypoints) {
    sim.set_setpoint({wp.position, wp.yaw});
    const double hold = wp.duration > 0.0 ? wp.duration : cfg.waypoint_time;
    const auto steps = static_cast<std::uint64_t>(std::llround(hold * cfg.physics_rate));
    for (std::uint64_t i = 0; i < steps && !report.aborted; ++i) {
      const auto ev = stepper ? stepper(sim) : sim.step();
      if (ev.odom) {
        const auto& s = sim.state();
        report.trajectory.push_back({s.time, s.position, s.orientation, s.velocity});
      }
      if (ev.scan) {
        ++report.scans;
        report.render_ms.push_back(sim.last_render_ms());
      }
      if (ev.collision) {
        report.collisions.push_back({sim.time(), ev.collision->offender, ev.collision->nearest_distance,
                                     sim.state().position});
        if (cfg.fail_on_collision) report.aborted = true;
      }
    }
    if (report.aborted) break;
  }
  sim.set_sink({});
  report.duration = sim.time();
  report.final_position = sim.state().position;
  report.log = std::move(log);
  return report;
}

}  // namespace lidarsim
