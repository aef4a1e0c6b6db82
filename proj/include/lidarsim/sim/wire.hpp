#pragma once

// JSON-lines wire messages. One object per line with "type" and "t" (s).
//
//   odom       {p:[x,y,z], q:[w,x,y,z], v:[..], w:[..]}
//   imu        {acc:[..], gyr:[..]}
//   scan       {frame:"sensor", n, points:[x0,y0,z0,...]}
//   setpoint   {p:[..], yaw}
//   collision  {offender, distance}
//   peer_pose  {id, p, q, size}
//   error      {message}
//
// Unknown fields are ignored on parse.

#include "lidarsim/renderer/render.hpp"
#include "lidarsim/vehicle/controller.hpp"
#include "lidarsim/vehicle/imu.hpp"
#include "lidarsim/world/collision.hpp"
#include "lidarsim/world/peers.hpp"

#include <json.hpp>

#include <variant>

namespace lidarsim {

struct OdomMsg {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
};

struct ImuMsg {
  double t = 0.0;
  Vec3 acc = Vec3::Zero();
  Vec3 gyr = Vec3::Zero();
};

struct ScanMsg {
  double t = 0.0;
  std::vector<float> points;  // flat x, y, z in the sensor frame
  std::size_t n() const { return points.size() / 3; }
};

struct SetpointMsg {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  double yaw = 0.0;
};

struct CollisionMsg {
  double t = 0.0;
  std::string offender;
  double distance = 0.0;
};

struct PeerPoseMsg {
  double t = 0.0;
  std::uint32_t id = 0;
  Vec3 p = Vec3::Zero();
  Quat q = Quat::Identity();
  double size = 0.3;
};

struct ErrorMsg {
  double t = 0.0;
  std::string message;
};

using WireMessage = std::variant<OdomMsg, ImuMsg, ScanMsg, SetpointMsg, CollisionMsg, PeerPoseMsg, ErrorMsg>;

namespace detail {

using nlohmann::json;

inline json vec_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
inline json quat_to_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }

inline const json& field(const json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ParseError(0, std::string("missing field '") + name + "'");
  return *it;
}

inline double number(const json& j, const char* name) {
  const auto& f = field(j, name);
  if (!f.is_number()) throw ParseError(0, std::string("field '") + name + "' must be a number");
  const double v = f.get<double>();
  if (!std::isfinite(v)) throw ParseError(0, std::string("field '") + name + "' must be finite");
  return v;
}

inline std::vector<double> numbers(const json& j, const char* name, std::size_t expect) {
  const auto& f = field(j, name);
  if (!f.is_array() || (expect && f.size() != expect))
    throw ParseError(0, std::string("field '") + name + "' must be an array of " + std::to_string(expect) +
                            " numbers");
  std::vector<double> out;
  out.reserve(f.size());
  for (const auto& x : f) {
    if (!x.is_number()) throw ParseError(0, std::string("field '") + name + "' must contain numbers");
    out.push_back(x.get<double>());
    if (!std::isfinite(out.back())) throw ParseError(0, std::string("field '") + name + "' must be finite");
  }
  return out;
}

inline Vec3 vec_field(const json& j, const char* name) {
  const auto v = numbers(j, name, 3);
  return {v[0], v[1], v[2]};
}

inline Quat quat_field(const json& j, const char* name) {
  const auto v = numbers(j, name, 4);
  Quat q(v[0], v[1], v[2], v[3]);
  const double n = q.norm();
  if (!(n > 1e-9)) throw ParseError(0, std::string("field '") + name + "' must be a non-zero quaternion");
  // Leave unit quaternions untouched so encode/parse round trips are bit-exact.
  return std::abs(n - 1.0) < 1e-12 ? q : q.normalized();
}

inline std::string string_field(const json& j, const char* name) {
  const auto& f = field(j, name);
  if (!f.is_string()) throw ParseError(0, std::string("field '") + name + "' must be a string");
  return f.get<std::string>();
}

}  // namespace detail

/// Encodes one message as a newline-terminated JSON line.
inline std::string encode_wire(const WireMessage& msg) {
  using detail::json;
  json j = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        json o;
        if constexpr (std::is_same_v<T, OdomMsg>) {
          o = {{"type", "odom"}, {"t", m.t}, {"p", detail::vec_to_json(m.p)}, {"q", detail::quat_to_json(m.q)},
               {"v", detail::vec_to_json(m.v)}, {"w", detail::vec_to_json(m.w)}};
        } else if constexpr (std::is_same_v<T, ImuMsg>) {
          o = {{"type", "imu"}, {"t", m.t}, {"acc", detail::vec_to_json(m.acc)}, {"gyr", detail::vec_to_json(m.gyr)}};
        } else if constexpr (std::is_same_v<T, ScanMsg>) {
          o = {{"type", "scan"}, {"t", m.t}, {"frame", "sensor"}, {"n", m.n()}, {"points", m.points}};
        } else if constexpr (std::is_same_v<T, SetpointMsg>) {
          o = {{"type", "setpoint"}, {"t", m.t}, {"p", detail::vec_to_json(m.p)}, {"yaw", m.yaw}};
        } else if constexpr (std::is_same_v<T, CollisionMsg>) {
          o = {{"type", "collision"}, {"t", m.t}, {"offender", m.offender}, {"distance", m.distance}};
        } else if constexpr (std::is_same_v<T, PeerPoseMsg>) {
          o = {{"type", "peer_pose"}, {"t", m.t}, {"id", m.id}, {"p", detail::vec_to_json(m.p)},
               {"q", detail::quat_to_json(m.q)}, {"size", m.size}};
        } else {
          o = {{"type", "error"}, {"t", m.t}, {"message", m.message}};
        }
        return o;
      },
      msg);
  return j.dump() + "\n";
}

/// Parses one line (trailing newline optional). Throws ParseError; for JSON
/// syntax errors the offset is the byte where parsing failed.
inline WireMessage parse_wire(std::string_view line) {
  using detail::json;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte > 0 ? e.byte - 1 : 0, "invalid JSON");
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("invalid JSON: ") + e.what());  // e.g. number overflow
  }
  if (!j.is_object()) throw ParseError(0, "message must be a JSON object");
  const std::string type = detail::string_field(j, "type");
  const double t = detail::number(j, "t");
  if (type == "odom")
    return OdomMsg{t, detail::vec_field(j, "p"), detail::quat_field(j, "q"), detail::vec_field(j, "v"),
                   detail::vec_field(j, "w")};
  if (type == "imu") return ImuMsg{t, detail::vec_field(j, "acc"), detail::vec_field(j, "gyr")};
  if (type == "scan") {
    ScanMsg m{t, {}};
    const auto flat = detail::numbers(j, "points", 0);
    if (flat.size() % 3 != 0) throw ParseError(0, "field 'points' length must be a multiple of 3");
    const double n = detail::number(j, "n");
    if (n != static_cast<double>(flat.size() / 3)) throw ParseError(0, "field 'n' does not match 'points'");
    m.points.assign(flat.begin(), flat.end());
    return m;
  }
  if (type == "setpoint") {
    SetpointMsg m{t, detail::vec_field(j, "p"), 0.0};
    if (j.contains("yaw")) m.yaw = detail::number(j, "yaw");
    return m;
  }
  if (type == "collision") return CollisionMsg{t, detail::string_field(j, "offender"), detail::number(j, "distance")};
  if (type == "peer_pose") {
    const double id = detail::number(j, "id");
    if (id < 0 || id > 4294967295.0 || id != std::floor(id)) throw ParseError(0, "field 'id' must be a u32");
    PeerPoseMsg m{t, static_cast<std::uint32_t>(id), detail::vec_field(j, "p"), detail::quat_field(j, "q"), 0.3};
    if (j.contains("size")) m.size = detail::number(j, "size");
    if (!(m.size > 0.0)) throw ParseError(0, "field 'size' must be > 0");
    return m;
  }
  if (type == "error") return ErrorMsg{t, detail::string_field(j, "message")};
  throw ParseError(0, "unknown message type '" + type + "'");
}

inline OdomMsg make_odom(const UavState& s) { return {s.time, s.position, s.orientation, s.velocity, s.angular_velocity}; }
inline ImuMsg make_imu(const ImuSample& s) { return {s.timestamp, s.specific_acceleration, s.angular_velocity}; }

inline ScanMsg make_scan(const ScanCloud& scan) {
  ScanMsg m{scan.timestamp, {}};
  m.points.reserve(scan.points.size() * 3);
  for (const auto& p : scan.points)
    for (int i = 0; i < 3; ++i) m.points.push_back(static_cast<float>(p[i]));
  return m;
}

inline CollisionMsg make_collision(double t, const CollisionReport& r) {
  return {t, std::string(offender_name(r.offender)), r.nearest_distance};
}

inline PeerPoseMsg make_peer_pose(const PeerPose& p) {
  return {p.timestamp, p.id, p.pose.position, p.pose.orientation, p.size};
}

inline PeerPose to_peer_pose(const PeerPoseMsg& m) {
  PeerPose p;
  p.id = m.id;
  p.pose.position = m.p;
  p.pose.orientation = m.q;
  p.size = m.size;
  p.timestamp = m.t;
  return p;
}

}  // namespace lidarsim
