#pragma once

// Simulation configuration: an INI file with the sections below. Every key that
// is absent receives its default and the default is reported through the
// `defaults` list so the caller can log it.
//
//   [map]        path | generate, format, resolution, voxel_edge, plane_neighbors,
//                planarity_threshold, cache, size, objects, seed
//   [sensor]     name, mount, noise
//   [vehicle]    params, start, start_yaw, id
//   [controller] position_natural_freq, position_damping, attitude_natural_freq,
//                attitude_damping, position_rate, attitude_rate
//   [imu]        accel_sigma, gyro_sigma, accel_bias_sigma, gyro_bias_sigma
//   [obstacles]  count, radius_min, radius_max, speed_min, speed_max, bounds_min, bounds_max
//   [rates]      lidar, imu, odom, physics
//   [network]    bind, peer_bind, peers, peer_drop_rate, realtime_factor
//   [sim]        seed, headless, fail_on_collision, ground_truth_odometry, waypoint_time
//   [log]        scan_points

#include "lidarsim/ini.hpp"
#include "lidarsim/renderer/pose.hpp"
#include "lidarsim/scene/scene.hpp"
#include "lidarsim/sensors/catalog.hpp"
#include "lidarsim/vehicle/controller.hpp"
#include "lidarsim/vehicle/imu.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>

namespace lidarsim {

struct SimConfig {
  // map
  std::string map_path;      // empty when generated
  std::string map_format = "auto";
  std::string map_generate;  // ROOM | FOREST | CORRIDOR, empty when loaded from file
  double map_resolution = 0.1;
  double voxel_edge = 5.0;
  int plane_neighbors = static_cast<int>(kDefaultPlaneNeighbors);
  double planarity_threshold = kDefaultPlanarityThreshold;
  std::string map_cache;
  Vec3 map_size = Vec3(10.0, 10.0, 3.0);
  int map_objects = 6;
  std::uint64_t map_seed = 1;

  // sensor
  std::string sensor = "AVIA";
  Vec3 mount_position = Vec3::Zero();
  Eigen::Vector4d mount_rotation = Eigen::Vector4d(1.0, 0.0, 0.0, 0.0);  // w, x, y, z
  bool sensor_noise = true;

  // vehicle
  std::string vehicle_params;
  Vec3 start = Vec3(0.0, 0.0, 1.0);
  double start_yaw = 0.0;
  std::uint32_t uav_id = 0;

  // controller
  double position_natural_freq = 2.0, position_damping = 1.0;
  double attitude_natural_freq = 20.0, attitude_damping = 1.0;
  double position_rate = 100.0, attitude_rate = 1000.0;

  // imu noise
  double accel_sigma = 0.05, gyro_sigma = 0.005, accel_bias_sigma = 0.02, gyro_bias_sigma = 0.001;

  // obstacles; bounds default to the map bounds when both are unset (NaN)
  int obstacle_count = 0;
  double obstacle_radius_min = 0.2, obstacle_radius_max = 0.5;
  double obstacle_speed_min = 0.5, obstacle_speed_max = 1.5;
  Vec3 obstacle_bounds_min = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
  Vec3 obstacle_bounds_max = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());

  // rates, Hz
  double lidar_rate = 10.0, imu_rate = 200.0, odom_rate = 100.0, physics_rate = 1000.0;

  // network
  std::string bind = "127.0.0.1:7600";
  std::string peer_bind;                // empty: peer sync disabled
  std::vector<std::string> peers;       // host:port
  double peer_drop_rate = 0.0;          // simulated inbound loss in [0, 1)
  double realtime_factor = 1.0;         // 0 = as fast as possible

  // sim
  std::uint64_t seed = 0;
  bool headless = true;
  bool fail_on_collision = false;
  bool ground_truth_odometry = true;
  double waypoint_time = 5.0;  // s per scripted waypoint

  // log
  bool log_scan_points = false;

  bool operator==(const SimConfig&) const;

  Pose mount() const {
    Pose p;
    p.position = mount_position;
    p.orientation = Quat(mount_rotation[0], mount_rotation[1], mount_rotation[2], mount_rotation[3]).normalized();
    return p;
  }

  UavParams uav_params() const;
  ImuNoiseConfig imu_noise() const { return {accel_sigma, gyro_sigma, accel_bias_sigma, gyro_bias_sigma}; }
  ControlRates control_rates() const { return {attitude_rate, position_rate}; }
  ControllerGains gains(const UavParams& p) const {
    return tune_gains({position_natural_freq, position_damping}, {attitude_natural_freq, attitude_damping}, p);
  }

  SensorModel sensor_model() const {
    SensorModel m = resolve_sensor(sensor);
    m.scan_rate = lidar_rate;
    return m;
  }

  bool obstacle_bounds_set() const { return all_finite(obstacle_bounds_min) && all_finite(obstacle_bounds_max); }
};

namespace detail {

using ConfigSetter = std::function<void(SimConfig&, const IniEntry&)>;
using ConfigWriter = std::function<std::string(const SimConfig&)>;

struct ConfigKey {
  const char* name;
  ConfigSetter set;
  ConfigWriter write;
};

inline std::string fmt_vec(const Vec3& v) {
  return ini_format(v.x()) + ", " + ini_format(v.y()) + ", " + ini_format(v.z());
}

inline Vec3 entry_vec3(const IniEntry& e) {
  const auto l = ini_list(e);
  if (l.size() != 3) throw ConfigError(e.key, e.line, "expected 3 comma-separated numbers");
  return {l[0], l[1], l[2]};
}

inline std::uint64_t entry_uint(const IniEntry& e) {
  const auto v = ini_int(e);
  if (v < 0) throw ConfigError(e.key, e.line, "must be >= 0");
  return static_cast<std::uint64_t>(v);
}

inline std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + items[i];
  return s;
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

#define LIDARSIM_KEY_D(name, field) \
  ConfigKey{name, [](SimConfig& c, const IniEntry& e) { c.field = ini_double(e); }, \
            [](const SimConfig& c) { return ini_format(c.field); }}
#define LIDARSIM_KEY_I(name, field) \
  ConfigKey{name, [](SimConfig& c, const IniEntry& e) { c.field = static_cast<int>(ini_int(e)); }, \
            [](const SimConfig& c) { return std::to_string(c.field); }}
#define LIDARSIM_KEY_U(name, field) \
  ConfigKey{name, [](SimConfig& c, const IniEntry& e) { c.field = static_cast<decltype(c.field)>(entry_uint(e)); }, \
            [](const SimConfig& c) { return std::to_string(c.field); }}
#define LIDARSIM_KEY_B(name, field) \
  ConfigKey{name, [](SimConfig& c, const IniEntry& e) { c.field = ini_bool(e); }, \
            [](const SimConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define LIDARSIM_KEY_S(name, field) \
  ConfigKey{name, [](SimConfig& c, const IniEntry& e) { c.field = e.value; }, \
            [](const SimConfig& c) { return c.field; }}
#define LIDARSIM_KEY_V(name, field) \
  ConfigKey{name, [](SimConfig& c, const IniEntry& e) { c.field = entry_vec3(e); }, \
            [](const SimConfig& c) { return fmt_vec(c.field); }}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      LIDARSIM_KEY_S("map.path", map_path),
      LIDARSIM_KEY_S("map.generate", map_generate),
      LIDARSIM_KEY_S("map.format", map_format),
      LIDARSIM_KEY_D("map.resolution", map_resolution),
      LIDARSIM_KEY_D("map.voxel_edge", voxel_edge),
      LIDARSIM_KEY_I("map.plane_neighbors", plane_neighbors),
      LIDARSIM_KEY_D("map.planarity_threshold", planarity_threshold),
      LIDARSIM_KEY_S("map.cache", map_cache),
      LIDARSIM_KEY_V("map.size", map_size),
      LIDARSIM_KEY_I("map.objects", map_objects),
      LIDARSIM_KEY_U("map.seed", map_seed),
      LIDARSIM_KEY_S("sensor.name", sensor),
      ConfigKey{"sensor.mount",
                [](SimConfig& c, const IniEntry& e) {
                  const auto l = ini_list(e);
                  if (l.size() != 7) throw ConfigError(e.key, e.line, "expected x, y, z, qw, qx, qy, qz");
                  c.mount_position = Vec3(l[0], l[1], l[2]);
                  c.mount_rotation = Eigen::Vector4d(l[3], l[4], l[5], l[6]);
                },
                [](const SimConfig& c) {
                  std::string s = fmt_vec(c.mount_position);
                  for (int i = 0; i < 4; ++i) s += ", " + ini_format(c.mount_rotation[i]);
                  return s;
                }},
      LIDARSIM_KEY_B("sensor.noise", sensor_noise),
      LIDARSIM_KEY_S("vehicle.params", vehicle_params),
      LIDARSIM_KEY_V("vehicle.start", start),
      LIDARSIM_KEY_D("vehicle.start_yaw", start_yaw),
      LIDARSIM_KEY_U("vehicle.id", uav_id),
      LIDARSIM_KEY_D("controller.position_natural_freq", position_natural_freq),
      LIDARSIM_KEY_D("controller.position_damping", position_damping),
      LIDARSIM_KEY_D("controller.attitude_natural_freq", attitude_natural_freq),
      LIDARSIM_KEY_D("controller.attitude_damping", attitude_damping),
      LIDARSIM_KEY_D("controller.position_rate", position_rate),
      LIDARSIM_KEY_D("controller.attitude_rate", attitude_rate),
      LIDARSIM_KEY_D("imu.accel_sigma", accel_sigma),
      LIDARSIM_KEY_D("imu.gyro_sigma", gyro_sigma),
      LIDARSIM_KEY_D("imu.accel_bias_sigma", accel_bias_sigma),
      LIDARSIM_KEY_D("imu.gyro_bias_sigma", gyro_bias_sigma),
      LIDARSIM_KEY_I("obstacles.count", obstacle_count),
      LIDARSIM_KEY_D("obstacles.radius_min", obstacle_radius_min),
      LIDARSIM_KEY_D("obstacles.radius_max", obstacle_radius_max),
      LIDARSIM_KEY_D("obstacles.speed_min", obstacle_speed_min),
      LIDARSIM_KEY_D("obstacles.speed_max", obstacle_speed_max),
      LIDARSIM_KEY_V("obstacles.bounds_min", obstacle_bounds_min),
      LIDARSIM_KEY_V("obstacles.bounds_max", obstacle_bounds_max),
      LIDARSIM_KEY_D("rates.lidar", lidar_rate),
      LIDARSIM_KEY_D("rates.imu", imu_rate),
      LIDARSIM_KEY_D("rates.odom", odom_rate),
      LIDARSIM_KEY_D("rates.physics", physics_rate),
      LIDARSIM_KEY_S("network.bind", bind),
      LIDARSIM_KEY_S("network.peer_bind", peer_bind),
      ConfigKey{"network.peers", [](SimConfig& c, const IniEntry& e) { c.peers = split_list(e.value); },
                [](const SimConfig& c) { return join(c.peers); }},
      LIDARSIM_KEY_D("network.peer_drop_rate", peer_drop_rate),
      LIDARSIM_KEY_D("network.realtime_factor", realtime_factor),
      LIDARSIM_KEY_U("sim.seed", seed),
      LIDARSIM_KEY_B("sim.headless", headless),
      LIDARSIM_KEY_B("sim.fail_on_collision", fail_on_collision),
      LIDARSIM_KEY_B("sim.ground_truth_odometry", ground_truth_odometry),
      LIDARSIM_KEY_D("sim.waypoint_time", waypoint_time),
      LIDARSIM_KEY_B("log.scan_points", log_scan_points),
  };
  return keys;
}

#undef LIDARSIM_KEY_D
#undef LIDARSIM_KEY_I
#undef LIDARSIM_KEY_U
#undef LIDARSIM_KEY_B
#undef LIDARSIM_KEY_S
#undef LIDARSIM_KEY_V

inline bool is_path_key(std::string_view k) { return k == "map.path" || k == "map.cache" || k == "vehicle.params"; }

}  // namespace detail

inline bool SimConfig::operator==(const SimConfig& o) const {
  for (const auto& k : detail::config_keys())
    if (k.write(*this) != k.write(o)) return false;
  return true;
}

/// Vehicle parameter file: `[uav]` section with the UavParams field names.
inline UavParams parse_uav_params(std::string_view text) {
  UavParams p;
  for (const auto& e : parse_ini(text)) {
    const std::string& k = e.key;
    if (k == "uav.mass") p.mass = ini_double(e);
    else if (k == "uav.inertia") p.inertia = detail::entry_vec3(e);
    else if (k == "uav.arm_length") p.arm_length = ini_double(e);
    else if (k == "uav.thrust_coeff") p.thrust_coeff = ini_double(e);
    else if (k == "uav.torque_coeff") p.torque_coeff = ini_double(e);
    else if (k == "uav.motor_natural_freq") p.motor_natural_freq = ini_double(e);
    else if (k == "uav.motor_damping") p.motor_damping = ini_double(e);
    else if (k == "uav.max_motor_speed") p.max_motor_speed = ini_double(e);
    else if (k == "uav.size") p.uav_size = ini_double(e);
    else if (k == "uav.gravity") p.gravity = ini_double(e);
    else throw ConfigError(k, e.line, "unknown key");
  }
  try {
    p.validate();
  } catch (const ParameterError& err) {
    throw ConfigError("uav." + err.name(), 0, err.what());
  }
  return p;
}

inline UavParams SimConfig::uav_params() const {
  if (vehicle_params.empty()) return {};
  std::ifstream in(vehicle_params, std::ios::binary);
  if (!in) throw ConfigError("vehicle.params", 0, "cannot read '" + vehicle_params + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_uav_params(ss.str());
}

/// Checks ranges and cross-field rules. `lines` maps keys to source lines for messages.
inline void validate_config(const SimConfig& c, const std::map<std::string, int>& lines = {}) {
  auto fail = [&](const std::string& key, const std::string& what) {
    auto it = lines.find(key);
    throw ConfigError(key, it == lines.end() ? 0 : it->second, what);
  };
  auto positive = [&](double v, const char* key) {
    if (!(v > 0.0)) fail(key, "must be > 0, got " + ini_format(v));
  };
  if (c.map_path.empty() == c.map_generate.empty()) fail("map.path", "exactly one of map.path and map.generate is required");
  if (!c.map_generate.empty()) {
    try {
      parse_map_kind(c.map_generate);
    } catch (const Error&) {
      fail("map.generate", "expected ROOM, FOREST or CORRIDOR");
    }
    for (int i = 0; i < 3; ++i) positive(c.map_size[i], "map.size");
    if (c.map_objects < 0) fail("map.objects", "must be >= 0");
  }
  if (c.map_format != "auto" && c.map_format != "pcd" && c.map_format != "ply" && c.map_format != "xyz")
    fail("map.format", "expected auto, pcd, ply or xyz");
  if (!c.map_path.empty() && !std::filesystem::exists(c.map_path)) fail("map.path", "file not found: " + c.map_path);
  if (!c.vehicle_params.empty() && !std::filesystem::exists(c.vehicle_params))
    fail("vehicle.params", "file not found: " + c.vehicle_params);
  positive(c.map_resolution, "map.resolution");
  if (!(c.voxel_edge >= c.map_resolution)) fail("map.voxel_edge", "must be >= map.resolution");
  if (c.plane_neighbors < 4) fail("map.plane_neighbors", "must be >= 4");
  positive(c.planarity_threshold, "map.planarity_threshold");
  try {
    (void)c.sensor_model();
  } catch (const Error& e) {
    fail("sensor.name", e.what());
  }
  if (!(c.mount_rotation.norm() > 1e-9)) fail("sensor.mount", "rotation quaternion must be non-zero");
  if (!all_finite(c.start)) fail("vehicle.start", "must be finite");
  positive(c.position_natural_freq, "controller.position_natural_freq");
  positive(c.position_damping, "controller.position_damping");
  positive(c.attitude_natural_freq, "controller.attitude_natural_freq");
  positive(c.attitude_damping, "controller.attitude_damping");
  if (c.attitude_natural_freq < kCascadeSeparation * c.position_natural_freq)
    fail("controller.attitude_natural_freq", "must be >= 5x controller.position_natural_freq");
  positive(c.position_rate, "controller.position_rate");
  positive(c.attitude_rate, "controller.attitude_rate");
  for (auto [v, key] : {std::pair{c.accel_sigma, "imu.accel_sigma"}, {c.gyro_sigma, "imu.gyro_sigma"},
                        {c.accel_bias_sigma, "imu.accel_bias_sigma"}, {c.gyro_bias_sigma, "imu.gyro_bias_sigma"}})
    if (!(v >= 0.0)) fail(key, "must be >= 0");
  if (c.obstacle_count < 0) fail("obstacles.count", "must be >= 0");
  positive(c.obstacle_radius_min, "obstacles.radius_min");
  if (c.obstacle_radius_max < c.obstacle_radius_min) fail("obstacles.radius_max", "must be >= obstacles.radius_min");
  if (!(c.obstacle_speed_min >= 0.0)) fail("obstacles.speed_min", "must be >= 0");
  if (c.obstacle_speed_max < c.obstacle_speed_min) fail("obstacles.speed_max", "must be >= obstacles.speed_min");
  if (all_finite(c.obstacle_bounds_min) != all_finite(c.obstacle_bounds_max))
    fail("obstacles.bounds_max", "set both obstacles.bounds_min and obstacles.bounds_max");
  if (c.obstacle_bounds_set() && !(c.obstacle_bounds_max.array() > c.obstacle_bounds_min.array()).all())
    fail("obstacles.bounds_max", "must exceed obstacles.bounds_min on every axis");
  positive(c.lidar_rate, "rates.lidar");
  positive(c.imu_rate, "rates.imu");
  positive(c.odom_rate, "rates.odom");
  positive(c.physics_rate, "rates.physics");
  if (c.lidar_rate > c.imu_rate) fail("rates.lidar", "must be <= rates.imu");
  if (c.imu_rate > c.physics_rate) fail("rates.imu", "must be <= rates.physics");
  if (c.odom_rate > c.physics_rate) fail("rates.odom", "must be <= rates.physics");
  if (c.attitude_rate > c.physics_rate) fail("controller.attitude_rate", "must be <= rates.physics");
  if (!(c.peer_drop_rate >= 0.0 && c.peer_drop_rate < 1.0)) fail("network.peer_drop_rate", "must be in [0, 1)");
  if (!(c.realtime_factor >= 0.0)) fail("network.realtime_factor", "must be >= 0");
  if (!c.peers.empty() && c.peer_bind.empty()) fail("network.peer_bind", "required when network.peers is set");
  positive(c.waypoint_time, "sim.waypoint_time");
}

/// Parses config text. Relative paths resolve against `base_dir`. Each key left
/// at its default appends "key = value" to `defaults`.
inline SimConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                              std::vector<std::string>* defaults = nullptr) {
  SimConfig c;
  std::map<std::string, int> lines;
  const auto& keys = detail::config_keys();
  for (const auto& e : parse_ini(text)) {
    auto it = std::find_if(keys.begin(), keys.end(), [&](const detail::ConfigKey& k) { return e.key == k.name; });
    if (it == keys.end()) throw ConfigError(e.key, e.line, "unknown key");
    if (lines.count(e.key)) throw ConfigError(e.key, e.line, "duplicate key");
    lines[e.key] = e.line;
    IniEntry value = e;
    const bool path_like = detail::is_path_key(e.key) || (e.key == "sensor.name" && !is_builtin_sensor(e.value));
    if (path_like && !e.value.empty() && !base_dir.empty() && std::filesystem::path(e.value).is_relative())
      value.value = std::filesystem::absolute(base_dir / e.value).lexically_normal().string();
    it->set(c, value);
  }
  if (!lines.count("map.path") && !lines.count("map.generate"))
    throw ConfigError("map.path", 0, "missing required key (or map.generate)");
  if (!lines.count("sensor.name")) throw ConfigError("sensor.name", 0, "missing required key");
  if (defaults)
    for (const auto& k : keys)
      if (!lines.count(k.name)) defaults->push_back(std::string(k.name) + " = " + k.write(c));
  validate_config(c, lines);
  return c;
}

inline SimConfig load_config(const std::string& path, std::vector<std::string>* defaults = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::path(path).parent_path(), defaults);
}

/// Writes every key. Absolute paths are kept, so the output reparses to an equal config.
inline std::string write_config(const SimConfig& c) {
  std::string out, section;
  for (const auto& k : detail::config_keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string sec = name.substr(0, dot);
    const std::string value = k.write(c);
    if (value.empty()) continue;
    if (value.find("nan") != std::string::npos) continue;
    if (sec != section) {
      if (!out.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + value + "\n";
  }
  return out;
}

}  // namespace lidarsim
