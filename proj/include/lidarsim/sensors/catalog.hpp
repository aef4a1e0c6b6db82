#pragma once

#include "lidarsim/ini.hpp"
#include "lidarsim/sensors/sensor_model.hpp"

#include <array>
#include <fstream>
#include <iterator>

namespace lidarsim {

enum class BuiltinSensor { Avia, Mid360, Vlp32, Vlp64, Os1_32, D455 };

inline constexpr std::array<std::pair<BuiltinSensor, const char*>, 6> kBuiltinSensorNames{{
    {BuiltinSensor::Avia, "AVIA"},
    {BuiltinSensor::Mid360, "MID360"},
    {BuiltinSensor::Vlp32, "VLP32"},
    {BuiltinSensor::Vlp64, "VLP64"},
    {BuiltinSensor::Os1_32, "OS1_32"},
    {BuiltinSensor::D455, "D455"},
}};

class CatalogError : public Error {
public:
  explicit CatalogError(const std::string& name) : Error(message(name)) {}

private:
  static std::string message(const std::string& name) {
    std::string s = "unknown sensor '" + name + "'; valid names:";
    for (const auto& [id, n] : kBuiltinSensorNames) s += std::string(" ") + n;
    return s;
  }
};

/// Golden-ratio offset between the two rosette prism frequencies.
inline constexpr double kRosetteFrequencyRatio = 1.6180339887498949;

inline std::vector<double> uniform_rings(int count, double lo_deg, double hi_deg) {
  std::vector<double> rings(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    rings[static_cast<std::size_t>(i)] = deg2rad(count == 1 ? lo_deg : lo_deg + (hi_deg - lo_deg) * i / (count - 1));
  return rings;
}

inline SensorModel spinning_model(std::string name, double fov_v_deg, int width, int height, int rings,
                                  double ring_lo_deg, double ring_hi_deg, double max_range) {
  SensorModel m;
  m.name = std::move(name);
  m.fov_h = 2.0 * kPi;
  m.fov_v = deg2rad(fov_v_deg);
  m.width = width;
  m.height = height;
  m.min_range = 0.3;
  m.max_range = max_range;
  m.pattern.kind = PatternKind::RingSpin;
  m.pattern.ring_elevations = uniform_rings(rings, ring_lo_deg, ring_hi_deg);
  m.pattern.azimuth_samples = width;
  return m;
}

inline SensorModel builtin_sensor(BuiltinSensor id) {
  SensorModel m;
  switch (id) {
    case BuiltinSensor::Avia:
      m.name = "AVIA";
      m.fov_h = deg2rad(77.0);
      m.fov_v = deg2rad(70.0);
      m.width = 385;
      m.height = 350;
      m.min_range = 0.1;
      m.max_range = 30.0;
      m.pattern.kind = PatternKind::Rosette;
      m.pattern.f1 = 50.0;
      m.pattern.f2 = 50.0 * kRosetteFrequencyRatio;
      m.pattern.a1 = m.pattern.a2 = std::min(m.fov_h, m.fov_v) / 4;
      m.pattern.samples_per_frame = 24000;
      break;
    case BuiltinSensor::Mid360:
      // symmetric approximation of the -7..52 deg vertical band
      m = spinning_model("MID360", 59.0, 1800, 295, 40, -29.0, 29.0, 40.0);
      m.min_range = 0.1;
      break;
    case BuiltinSensor::Vlp32: m = spinning_model("VLP32", 50.0, 1800, 100, 32, -25.0, 15.0, 100.0); break;
    case BuiltinSensor::Vlp64: m = spinning_model("VLP64", 50.0, 2048, 200, 64, -24.9, 2.0, 120.0); break;
    case BuiltinSensor::Os1_32: m = spinning_model("OS1_32", 45.0, 1024, 90, 32, -22.5, 22.5, 120.0); break;
    case BuiltinSensor::D455:
      m.name = "D455";
      m.projection = Projection::Pinhole;
      m.fov_h = deg2rad(87.0);
      m.fov_v = deg2rad(58.0);
      m.width = 848;
      m.height = 480;
      m.min_range = 0.4;
      m.max_range = 6.0;
      m.scan_rate = 30.0;
      m.noise.range_sigma = 0.01;
      m.pattern.kind = PatternKind::FullRaster;
      break;
  }
  m.validate();
  return m;
}

inline SensorModel builtin_sensor(const std::string& name) {
  std::string upper = name;
  std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return std::toupper(c); });
  for (const auto& [id, n] : kBuiltinSensorNames)
    if (upper == n) return builtin_sensor(id);
  throw CatalogError(name);
}

inline bool is_builtin_sensor(const std::string& name) {
  try {
    builtin_sensor(name);
    return true;
  } catch (const CatalogError&) {
    return false;
  }
}

/// Parses a sensor catalog: one `[section]` per sensor, keys listed in the README.
/// A section may start from a builtin with `base = AVIA`.
inline std::map<std::string, SensorModel> parse_sensor_catalog(std::string_view text) {
  std::map<std::string, SensorModel> out;
  std::map<std::string, int> ring_count;
  std::map<std::string, std::pair<double, double>> ring_span;
  for (const auto& e : parse_ini(text)) {
    if (e.section.empty()) throw ConfigError(e.key, e.line, "sensor keys must be inside a [section]");
    auto [it, fresh] = out.try_emplace(e.section);
    SensorModel& m = it->second;
    if (fresh) m.name = e.section;
    const std::string key = e.key.substr(e.section.size() + 1);
    if (key == "base") {
      try {
        m = builtin_sensor(e.value);
      } catch (const CatalogError& err) {
        throw ConfigError(e.key, e.line, err.what());
      }
      m.name = e.section;
    } else if (key == "projection") {
      if (e.value == "spherical") m.projection = Projection::Spherical;
      else if (e.value == "pinhole") m.projection = Projection::Pinhole;
      else throw ConfigError(e.key, e.line, "expected spherical or pinhole");
    } else if (key == "fov_h_deg") m.fov_h = deg2rad(ini_double(e));
    else if (key == "fov_v_deg") m.fov_v = deg2rad(ini_double(e));
    else if (key == "width") m.width = static_cast<int>(ini_int(e));
    else if (key == "height") m.height = static_cast<int>(ini_int(e));
    else if (key == "min_range") m.min_range = ini_double(e);
    else if (key == "max_range") m.max_range = ini_double(e);
    else if (key == "scan_rate") m.scan_rate = ini_double(e);
    else if (key == "range_sigma") m.noise.range_sigma = ini_double(e);
    else if (key == "pattern") {
      if (e.value == "full_raster") m.pattern.kind = PatternKind::FullRaster;
      else if (e.value == "ring_spin") m.pattern.kind = PatternKind::RingSpin;
      else if (e.value == "rosette") m.pattern.kind = PatternKind::Rosette;
      else throw ConfigError(e.key, e.line, "expected full_raster, ring_spin or rosette");
    } else if (key == "rings_deg") {
      m.pattern.ring_elevations.clear();
      for (double d : ini_list(e)) m.pattern.ring_elevations.push_back(deg2rad(d));
    } else if (key == "ring_count") ring_count[e.section] = static_cast<int>(ini_int(e));
    else if (key == "ring_min_deg") ring_span[e.section].first = ini_double(e);
    else if (key == "ring_max_deg") ring_span[e.section].second = ini_double(e);
    else if (key == "azimuth_samples") m.pattern.azimuth_samples = static_cast<int>(ini_int(e));
    else if (key == "f1") m.pattern.f1 = ini_double(e);
    else if (key == "f2") m.pattern.f2 = ini_double(e);
    else if (key == "a1_deg") m.pattern.a1 = deg2rad(ini_double(e));
    else if (key == "a2_deg") m.pattern.a2 = deg2rad(ini_double(e));
    else if (key == "samples_per_frame") m.pattern.samples_per_frame = static_cast<int>(ini_int(e));
    else if (key == "phase_continuity") m.pattern.phase_continuity = ini_bool(e);
    else throw ConfigError(e.key, e.line, "unknown sensor key");
  }
  for (auto& [name, count] : ring_count) {
    auto span = ring_span[name];
    out[name].pattern.ring_elevations = uniform_rings(count, span.first, span.second);
  }
  for (auto& [name, m] : out) {
    try {
      m.validate();
    } catch (const ParameterError& err) {
      throw ConfigError(name + "." + err.name(), 0, err.what());
    }
  }
  return out;
}

/// Resolves `--sensor <name|path>`: a builtin name, or `path[:section]` of a catalog file.
inline SensorModel resolve_sensor(const std::string& spec) {
  if (is_builtin_sensor(spec)) return builtin_sensor(spec);
  std::string path = spec, section;
  if (auto colon = spec.rfind(':'); colon != std::string::npos && colon + 1 < spec.size()) {
    path = spec.substr(0, colon);
    section = spec.substr(colon + 1);
  }
  std::ifstream in(path);
  if (!in) throw CatalogError(spec);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  auto catalog = parse_sensor_catalog(text);
  if (catalog.empty()) throw ConfigError("", 0, "sensor catalog '" + path + "' defines no sensors");
  if (section.empty()) return catalog.begin()->second;
  auto it = catalog.find(section);
  if (it == catalog.end()) throw ConfigError(section, 0, "sensor not found in catalog '" + path + "'");
  return it->second;
}

}  // namespace lidarsim
