#pragma once

// Analytic scenes built from rectangles, boxes, vertical cylinders and spheres.
// Surfaces are sampled on cell-centred grids so a surface of area A yields about
// A / r^2 points.

#include "lidarsim/pointmap/point_map.hpp"
#include "lidarsim/sensors/noise.hpp"

#include <json.hpp>

#include <variant>

namespace lidarsim {

/// Planar parallelogram origin + s*u + t*v, s,t in [0,1]; u and v orthogonal.
struct RectPrim {
  Vec3 origin = Vec3::Zero();
  Vec3 u = Vec3::UnitX();
  Vec3 v = Vec3::UnitY();
};

/// Axis-aligned solid box. `open_bottom` skips sampling the bottom face.
struct BoxPrim {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Ones();
  bool open_bottom = true;
};

/// Vertical cylinder side surface, axis through (x, y).
struct CylinderPrim {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.1;
  double z_min = 0.0, z_max = 1.0;
};

struct SpherePrim {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

using Primitive = std::variant<RectPrim, BoxPrim, CylinderPrim, SpherePrim>;

struct Scene {
  std::string kind;
  double resolution = 0.05;
  std::uint64_t seed = 0;
  std::vector<Primitive> primitives;

  double surface_area() const;
};

namespace detail {

inline double sampled_area(const Primitive& p) {
  struct V {
    double operator()(const RectPrim& r) const { return r.u.norm() * r.v.norm(); }
    double operator()(const BoxPrim& b) const {
      const Vec3 e = b.max - b.min;
      const double all = 2.0 * (e.x() * e.y() + e.y() * e.z() + e.x() * e.z());
      return b.open_bottom ? all - e.x() * e.y() : all;
    }
    double operator()(const CylinderPrim& c) const { return 2.0 * kPi * c.radius * (c.z_max - c.z_min); }
    double operator()(const SpherePrim& s) const { return 4.0 * kPi * s.radius * s.radius; }
  };
  return std::visit(V{}, p);
}

inline int cells_along(double length, double spacing) {
  return std::max(1, static_cast<int>(std::lround(length / spacing)));
}

inline void sample_rect(const RectPrim& r, double spacing, PointList& out) {
  const int nu = cells_along(r.u.norm(), spacing), nv = cells_along(r.v.norm(), spacing);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nv; ++j)
      out.push_back(r.origin + r.u * ((i + 0.5) / nu) + r.v * ((j + 0.5) / nv));
}

/// The six (or five) faces of a box as rectangles.
inline std::vector<RectPrim> box_faces(const BoxPrim& b) {
  const Vec3 e = b.max - b.min;
  const Vec3 ex(e.x(), 0, 0), ey(0, e.y(), 0), ez(0, 0, e.z());
  std::vector<RectPrim> f = {
      {b.min, ex, ey},                     // bottom
      {b.min + ez, ex, ey},                // top
      {b.min, ey, ez},                     // -x
      {b.min + ex, ey, ez},                // +x
      {b.min, ex, ez},                     // -y
      {b.min + ey, ex, ez},                // +y
  };
  if (b.open_bottom) f.erase(f.begin());
  return f;
}

inline void sample_cylinder(const CylinderPrim& c, double spacing, PointList& out) {
  const int na = cells_along(2.0 * kPi * c.radius, spacing), nz = cells_along(c.z_max - c.z_min, spacing);
  for (int i = 0; i < na; ++i) {
    const double a = 2.0 * kPi * (i + 0.5) / na;
    for (int k = 0; k < nz; ++k)
      out.emplace_back(c.center.x() + c.radius * std::cos(a), c.center.y() + c.radius * std::sin(a),
                       c.z_min + (c.z_max - c.z_min) * (k + 0.5) / nz);
  }
}

inline void sample_sphere(const SpherePrim& s, double spacing, PointList& out) {
  const auto n = std::max<std::size_t>(
      12, static_cast<std::size_t>(std::lround(4.0 * kPi * s.radius * s.radius / (spacing * spacing))));
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * static_cast<double>(i);
    out.push_back(s.center + s.radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z));
  }
}

}  // namespace detail

inline double Scene::surface_area() const {
  double a = 0.0;
  for (const auto& p : primitives) a += detail::sampled_area(p);
  return a;
}

inline RawCloud sample_scene(const Scene& scene) {
  require_positive(scene.resolution, "r_map");
  const double s = scene.resolution;
  RawCloud cloud;
  for (const auto& prim : scene.primitives) {
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, RectPrim>) {
            detail::sample_rect(p, s, cloud.points);
          } else if constexpr (std::is_same_v<T, BoxPrim>) {
            for (const auto& f : detail::box_faces(p)) detail::sample_rect(f, s, cloud.points);
          } else if constexpr (std::is_same_v<T, CylinderPrim>) {
            detail::sample_cylinder(p, s, cloud.points);
          } else {
            detail::sample_sphere(p, s, cloud.points);
          }
        },
        prim);
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// generators

enum class MapKind { Room, Forest, Corridor };

struct GenParams {
  MapKind kind = MapKind::Room;
  double resolution = 0.05;
  Vec3 size = Vec3(10.0, 10.0, 3.0);  // room / forest ground / corridor (length, width, height)
  std::size_t objects = 6;            // boxes (room, corridor) or trees (forest)
  double object_min = 0.4, object_max = 1.2;  // box edge or trunk radius scale, m
  std::uint64_t seed = 0;
};

inline MapKind parse_map_kind(std::string_view s) {
  std::string up(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (up == "ROOM") return MapKind::Room;
  if (up == "FOREST") return MapKind::Forest;
  if (up == "CORRIDOR") return MapKind::Corridor;
  throw ParameterError("kind", "unknown map kind '" + std::string(s) + "' (ROOM, FOREST, CORRIDOR)");
}

inline std::string_view map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::Room: return "ROOM";
    case MapKind::Forest: return "FOREST";
    default: return "CORRIDOR";
  }
}

namespace detail {

/// Closed shell of inward-facing rectangles for [0,sx] x [0,sy] x [0,sz].
inline void add_shell(std::vector<Primitive>& prims, const Vec3& size) {
  const Vec3 ex(size.x(), 0, 0), ey(0, size.y(), 0), ez(0, 0, size.z());
  prims.push_back(RectPrim{Vec3::Zero(), ex, ey});  // floor
  prims.push_back(RectPrim{ez, ex, ey});            // ceiling
  prims.push_back(RectPrim{Vec3::Zero(), ey, ez});  // x = 0
  prims.push_back(RectPrim{ex, ey, ez});            // x = sx
  prims.push_back(RectPrim{Vec3::Zero(), ex, ez});  // y = 0
  prims.push_back(RectPrim{ey, ex, ez});            // y = sy
}

/// Snaps to the sampling grid so box faces line up with the floor sampling.
inline double snap(double x, double r) { return std::round(x / r) * r; }

inline void add_floor_boxes(std::vector<Primitive>& prims, const GenParams& g, Rng& rng, double margin_x_lo,
                            double margin_x_hi, double margin_y_lo, double margin_y_hi, double max_h) {
  const double r = g.resolution;
  for (std::size_t i = 0; i < g.objects; ++i) {
    const double ex = snap(uniform(rng, g.object_min, g.object_max), r);
    const double ey = snap(uniform(rng, g.object_min, g.object_max), r);
    const double ez = snap(std::min(max_h, uniform(rng, g.object_min, 2.0 * g.object_max)), r);
    const double x0 = snap(uniform(rng, margin_x_lo, std::max(margin_x_lo, margin_x_hi - ex)), r);
    const double y0 = snap(uniform(rng, margin_y_lo, std::max(margin_y_lo, margin_y_hi - ey)), r);
    prims.push_back(BoxPrim{Vec3(x0, y0, 0.0), Vec3(x0 + std::max(ex, r), y0 + std::max(ey, r), std::max(ez, r)),
                            true});
  }
}

}  // namespace detail

inline Scene generate_scene(const GenParams& g) {
  require_positive(g.resolution, "r_map");
  for (int a = 0; a < 3; ++a) require_positive(g.size[a], "size");
  require_positive(g.object_min, "object_min");
  if (g.object_max < g.object_min) throw ParameterError("object_max", "must be >= object_min");
  Scene s;
  s.kind = std::string(map_kind_name(g.kind));
  s.resolution = g.resolution;
  s.seed = g.seed;
  Rng rng = make_rng(g.seed, static_cast<std::uint64_t>(g.kind) + 101);
  const Vec3& sz = g.size;
  switch (g.kind) {
    case MapKind::Room: {
      detail::add_shell(s.primitives, sz);
      const double m = 0.15 * std::min(sz.x(), sz.y());
      detail::add_floor_boxes(s.primitives, g, rng, m, sz.x() - m, m, sz.y() - m, 0.8 * sz.z());
      break;
    }
    case MapKind::Corridor: {
      detail::add_shell(s.primitives, sz);
      // pillars against alternating side walls, leaving a free centre lane
      const double w = sz.y();
      for (std::size_t i = 0; i < g.objects; ++i) {
        const double len = detail::snap(uniform(rng, g.object_min, g.object_max), g.resolution);
        const double depth = detail::snap(std::min(0.3 * w, uniform(rng, g.object_min, g.object_max)), g.resolution);
        const double x0 = detail::snap(
            sz.x() * (static_cast<double>(i) + 0.5) / static_cast<double>(g.objects) - len / 2.0, g.resolution);
        const bool left = i % 2 == 0;
        const double y0 = left ? 0.0 : w - depth;
        s.primitives.push_back(BoxPrim{Vec3(x0, y0, 0.0), Vec3(x0 + len, y0 + depth, sz.z()), true});
      }
      break;
    }
    case MapKind::Forest: {
      s.primitives.push_back(RectPrim{Vec3::Zero(), Vec3(sz.x(), 0, 0), Vec3(0, sz.y(), 0)});
      for (std::size_t i = 0; i < g.objects; ++i) {
        CylinderPrim c;
        c.radius = uniform(rng, 0.1 * g.object_min, 0.3 * g.object_max);
        c.center = {uniform(rng, c.radius, sz.x() - c.radius), uniform(rng, c.radius, sz.y() - c.radius)};
        c.z_min = 0.0;
        c.z_max = uniform(rng, 0.5 * sz.z(), sz.z());
        s.primitives.push_back(c);
        s.primitives.push_back(SpherePrim{Vec3(c.center.x(), c.center.y(), c.z_max + 3.0 * c.radius), 3.0 * c.radius});
      }
      break;
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// primitives JSON

namespace detail {
inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }
inline Vec3 json_vec(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
}  // namespace detail

inline std::string scene_to_json(const Scene& s) {
  using nlohmann::json;
  using detail::vec_json;
  json prims = json::array();
  for (const auto& prim : s.primitives) {
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, RectPrim>)
            prims.push_back({{"type", "rect"}, {"origin", vec_json(p.origin)}, {"u", vec_json(p.u)}, {"v", vec_json(p.v)}});
          else if constexpr (std::is_same_v<T, BoxPrim>)
            prims.push_back({{"type", "box"}, {"min", vec_json(p.min)}, {"max", vec_json(p.max)}, {"open_bottom", p.open_bottom}});
          else if constexpr (std::is_same_v<T, CylinderPrim>)
            prims.push_back({{"type", "cylinder"}, {"center", {p.center.x(), p.center.y()}}, {"radius", p.radius},
                             {"z_min", p.z_min}, {"z_max", p.z_max}});
          else
            prims.push_back({{"type", "sphere"}, {"center", vec_json(p.center)}, {"radius", p.radius}});
        },
        prim);
  }
  json j = {{"kind", s.kind}, {"resolution", s.resolution}, {"seed", s.seed}, {"primitives", prims}};
  return j.dump(1) + "\n";
}

inline Scene scene_from_json(std::string_view text) {
  using detail::json_vec;
  Scene s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.kind = j.value("kind", std::string{});
    s.resolution = j.at("resolution").get<double>();
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& p : j.at("primitives")) {
      const auto type = p.at("type").get<std::string>();
      if (type == "rect")
        s.primitives.push_back(RectPrim{json_vec(p.at("origin")), json_vec(p.at("u")), json_vec(p.at("v"))});
      else if (type == "box")
        s.primitives.push_back(BoxPrim{json_vec(p.at("min")), json_vec(p.at("max")), p.value("open_bottom", true)});
      else if (type == "cylinder")
        s.primitives.push_back(CylinderPrim{{p.at("center").at(0).get<double>(), p.at("center").at(1).get<double>()},
                                            p.at("radius").get<double>(), p.at("z_min").get<double>(),
                                            p.at("z_max").get<double>()});
      else if (type == "sphere")
        s.primitives.push_back(SpherePrim{json_vec(p.at("center")), p.at("radius").get<double>()});
      else
        throw Error("unknown primitive type '" + type + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("invalid scene file: ") + e.what());
  }
  return s;
}

}  // namespace lidarsim
