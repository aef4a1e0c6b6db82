#include "lidarsim/sim/wire.hpp"
#include "support/gen.hpp"

#include <gtest/gtest.h>

using namespace lidarsim;
using testsupport::Gen;

namespace {

std::size_t error_offset(std::string_view line) {
  try {
    parse_wire(line);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "accepted: " << line;
  return 0;
}

bool rejects(std::string_view line) {
  try {
    parse_wire(line);
  } catch (const ParseError&) {
    return true;
  }
  return false;
}

bool same_quat(const Quat& a, const Quat& b) { return a.coeffs() == b.coeffs(); }

WireMessage random_message(Gen& g, int type) {
  const double t = g.uniform(0, 1e4);
  const auto v = [&] { return g.point_in(Vec3::Constant(-1e3), Vec3::Constant(1e3)); };
  switch (type) {
    case 0: return OdomMsg{t, v(), g.rotation(), v(), v()};
    case 1: return ImuMsg{t, v(), v()};
    case 2: {
      ScanMsg m{t, {}};
      for (int i = 3 * g.integer(0, 200); i > 0; --i) m.points.push_back(static_cast<float>(g.uniform(-50, 50)));
      return m;
    }
    case 3: return SetpointMsg{t, v(), g.uniform(-3.2, 3.2)};
    case 4: return CollisionMsg{t, g.coin() ? "STATIC_MAP" : "OBSTACLE", g.uniform(0, 1)};
    case 5: return PeerPoseMsg{t, static_cast<std::uint32_t>(g.integer(0, 1 << 30)), v(), g.rotation(), g.uniform(0.1, 1)};
    default: return ErrorMsg{t, "bad \"line\"\n\tnext \xc3\xa9"};
  }
}

bool equal(const WireMessage& a, const WireMessage& b) {
  if (a.index() != b.index()) return false;
  return std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b);
        if constexpr (std::is_same_v<T, OdomMsg>)
          return x.t == y.t && x.p == y.p && same_quat(x.q, y.q) && x.v == y.v && x.w == y.w;
        else if constexpr (std::is_same_v<T, ImuMsg>)
          return x.t == y.t && x.acc == y.acc && x.gyr == y.gyr;
        else if constexpr (std::is_same_v<T, ScanMsg>)
          return x.t == y.t && x.points == y.points;
        else if constexpr (std::is_same_v<T, SetpointMsg>)
          return x.t == y.t && x.p == y.p && x.yaw == y.yaw;
        else if constexpr (std::is_same_v<T, CollisionMsg>)
          return x.t == y.t && x.offender == y.offender && x.distance == y.distance;
        else if constexpr (std::is_same_v<T, PeerPoseMsg>)
          return x.t == y.t && x.id == y.id && x.p == y.p && same_quat(x.q, y.q) && x.size == y.size;
        else
          return x.t == y.t && x.message == y.message;
      },
      a);
}

}  // namespace

TEST(Wire, SelfRoundTripProperty) {
  Gen g(21);
  for (int i = 0; i < 2000; ++i) {
    const WireMessage m = random_message(g, i % 7);
    const std::string line = encode_wire(m);
    ASSERT_EQ(line.back(), '\n');
    ASSERT_EQ(std::count(line.begin(), line.end(), '\n'), 1) << line;
    const WireMessage back = parse_wire(line);
    ASSERT_TRUE(equal(m, back)) << line;
    ASSERT_EQ(encode_wire(back), line);
  }
}

TEST(Wire, FieldNamesAreExact) {
  const auto j = [](const WireMessage& m) { return nlohmann::json::parse(encode_wire(m)); };
  auto o = j(OdomMsg{1.5, Vec3(1, 2, 3), Quat::Identity(), Vec3::Zero(), Vec3::Zero()});
  EXPECT_EQ(o["type"], "odom");
  EXPECT_EQ(o["t"], 1.5);
  EXPECT_EQ(o["p"], nlohmann::json::array({1.0, 2.0, 3.0}));
  EXPECT_EQ(o["q"], nlohmann::json::array({1.0, 0.0, 0.0, 0.0}));
  EXPECT_TRUE(o.contains("v") && o.contains("w"));
  EXPECT_EQ(j(ImuMsg{})["type"], "imu");
  EXPECT_TRUE(j(ImuMsg{}).contains("acc") && j(ImuMsg{}).contains("gyr"));
  auto s = j(ScanMsg{0.1, {1, 2, 3, 4, 5, 6}});
  EXPECT_EQ(s["type"], "scan");
  EXPECT_EQ(s["frame"], "sensor");
  EXPECT_EQ(s["n"], 2);
  EXPECT_EQ(s["points"].size(), 6u);
  EXPECT_EQ(j(SetpointMsg{0, Vec3::Zero(), 0.5})["yaw"], 0.5);
  auto c = j(CollisionMsg{0, "OBSTACLE", 0.1});
  EXPECT_EQ(c["type"], "collision");
  EXPECT_EQ(c["offender"], "OBSTACLE");
  auto p = j(PeerPoseMsg{0, 7, Vec3::Zero(), Quat::Identity(), 0.3});
  EXPECT_EQ(p["type"], "peer_pose");
  EXPECT_EQ(p["id"], 7);
  EXPECT_EQ(p["size"], 0.3);
}

TEST(Wire, MalformedJsonReportsOffset) {
  EXPECT_EQ(error_offset(R"({"type":"odom",)"), 15u);
  EXPECT_EQ(error_offset("x"), 0u);
  // a missing comma is detected on the next token, "t" at bytes 14..16
  const std::size_t at = error_offset(R"({"type":"imu" "t":1})");
  EXPECT_GE(at, 14u);
  EXPECT_LE(at, 16u);
  EXPECT_TRUE(rejects(""));
  EXPECT_TRUE(rejects("[1,2]"));
  EXPECT_TRUE(rejects("42"));
}

TEST(Wire, SchemaViolationsRejected) {
  EXPECT_TRUE(rejects(R"({"t":0})"));
  EXPECT_TRUE(rejects(R"({"type":"odom"})"));
  EXPECT_TRUE(rejects(R"({"type":"teleport","t":0})"));
  EXPECT_TRUE(rejects(R"({"type":"setpoint","t":0,"p":[1,2]})"));
  EXPECT_TRUE(rejects(R"({"type":"setpoint","t":0,"p":[1,2,"3"]})"));
  EXPECT_TRUE(rejects(R"({"type":"setpoint","t":"0","p":[1,2,3]})"));
  EXPECT_TRUE(rejects(R"({"type":"scan","t":0,"frame":"sensor","n":2,"points":[1,2,3]})"));
  EXPECT_TRUE(rejects(R"({"type":"scan","t":0,"frame":"sensor","n":1,"points":[1,2]})"));
  EXPECT_TRUE(rejects(R"({"type":"peer_pose","t":0,"id":-1,"p":[0,0,0],"q":[1,0,0,0]})"));
  EXPECT_TRUE(rejects(R"({"type":"peer_pose","t":0,"id":1.5,"p":[0,0,0],"q":[1,0,0,0]})"));
  EXPECT_TRUE(rejects(R"({"type":"peer_pose","t":0,"id":1,"p":[0,0,0],"q":[0,0,0,0]})"));
  EXPECT_TRUE(rejects(R"({"type":"peer_pose","t":0,"id":1,"p":[0,0,0],"q":[1,0,0,0],"size":0})"));
}

TEST(Wire, NonFiniteNumbersRejected) {
  // JSON has no literal for these; overflow and nlohmann's null encoding are the routes in
  EXPECT_TRUE(rejects(R"({"type":"setpoint","t":0,"p":[1e400,0,0]})"));
  EXPECT_TRUE(rejects(R"({"type":"setpoint","t":0,"p":[null,0,0]})"));
  EXPECT_TRUE(rejects(R"({"type":"setpoint","t":NaN,"p":[0,0,0]})"));
  EXPECT_TRUE(rejects(R"({"type":"imu","t":-1e999,"acc":[0,0,0],"gyr":[0,0,0]})"));
  // an encoder given NaN writes null, which the parser refuses
  EXPECT_TRUE(rejects(encode_wire(SetpointMsg{0, Vec3(std::nan(""), 0, 0), 0})));
}

TEST(Wire, UnknownFieldsIgnored) {
  const auto m = parse_wire(R"({"type":"setpoint","t":2,"p":[1,2,3],"yaw":0.5,"extra":{"a":[1]},"z":null})");
  const auto& sp = std::get<SetpointMsg>(m);
  EXPECT_EQ(sp.t, 2.0);
  EXPECT_EQ(sp.p, Vec3(1, 2, 3));
  EXPECT_EQ(sp.yaw, 0.5);
  // optional fields take defaults
  EXPECT_EQ(std::get<SetpointMsg>(parse_wire(R"({"type":"setpoint","t":0,"p":[0,0,0]})")).yaw, 0.0);
  const auto pp = std::get<PeerPoseMsg>(parse_wire(R"({"type":"peer_pose","t":0,"id":3,"p":[0,0,0],"q":[2,0,0,0]})"));
  EXPECT_EQ(pp.size, 0.3);
  EXPECT_EQ(pp.q.w(), 1.0);
}

TEST(Wire, TrailingNewlinesAccepted) {
  const std::string line = R"({"type":"imu","t":1,"acc":[0,0,9.81],"gyr":[0,0,0]})";
  for (const char* end : {"", "\n", "\r\n"}) {
    EXPECT_EQ(std::get<ImuMsg>(parse_wire(line + end)).acc.z(), 9.81);
  }
}

TEST(Wire, ConversionsFromSimulationTypes) {
  UavState s = UavState::hovering(UavParams{}, Vec3(1, 2, 3), 0.4);
  s.time = 2.5;
  const OdomMsg o = make_odom(s);
  EXPECT_EQ(o.t, 2.5);
  EXPECT_EQ(o.p, s.position);
  EXPECT_TRUE(same_quat(o.q, s.orientation));

  ScanCloud scan;
  scan.timestamp = 0.3;
  scan.points = {Vec3(1, 2, 3), Vec3(-4, 5, 0.5)};
  const ScanMsg sm = make_scan(scan);
  EXPECT_EQ(sm.n(), 2u);
  EXPECT_EQ(sm.points, (std::vector<float>{1, 2, 3, -4, 5, 0.5f}));

  PeerPose pp;
  pp.id = 9;
  pp.pose.position = Vec3(1, 1, 1);
  pp.size = 0.4;
  pp.timestamp = 1.25;
  const PeerPose back = to_peer_pose(std::get<PeerPoseMsg>(parse_wire(encode_wire(make_peer_pose(pp)))));
  EXPECT_EQ(back.id, 9u);
  EXPECT_EQ(back.pose.position, pp.pose.position);
  EXPECT_EQ(back.size, 0.4);
  EXPECT_EQ(back.timestamp, 1.25);

  CollisionReport r;
  r.colliding = true;
  r.offender = Offender::Obstacle;
  r.nearest_distance = 0.05;
  const CollisionMsg cm = make_collision(4.0, r);
  EXPECT_EQ(cm.offender, offender_name(Offender::Obstacle));
  EXPECT_EQ(cm.distance, 0.05);
}
