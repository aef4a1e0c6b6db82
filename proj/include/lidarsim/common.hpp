#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lidarsim {

using Vec3 = Eigen::Vector3d;
using Vec3f = Eigen::Vector3f;
using Vec3i = Eigen::Vector3i;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

using PointList = std::vector<Vec3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller supplied an out-of-domain numeric parameter.
class ParameterError : public Error {
public:
  ParameterError(const std::string& name, const std::string& what)
      : Error("invalid parameter '" + name + "': " + what), name_(name) {}
  const std::string& name() const noexcept { return name_; }

private:
  std::string name_;
};

/// Malformed input file or message. `offset` is a byte offset into the input.
class ParseError : public Error {
public:
  ParseError(std::size_t offset, const std::string& what)
      : Error("parse error at byte " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

class EmptyMapError : public Error {
public:
  EmptyMapError() : Error("point cloud contains no valid points") {}
};

inline void require_positive(double value, const char* name) {
  if (!(value > 0.0)) throw ParameterError(name, "must be > 0, got " + std::to_string(value));
}

inline bool all_finite(const Vec3& p) { return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z()); }

}  // namespace lidarsim
