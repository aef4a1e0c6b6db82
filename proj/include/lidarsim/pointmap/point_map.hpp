#pragma once

#include "lidarsim/pointmap/cloud_io.hpp"
#include "lidarsim/pointmap/kdtree.hpp"
#include "lidarsim/pointmap/plane_fit.hpp"
#include "lidarsim/pointmap/voxel_grid.hpp"

#include <bit>
#include <chrono>
#include <memory>

namespace lidarsim {

struct MapParams {
  double resolution = 0.1;   // r_map, m
  double voxel_edge = 5.0;   // l, m
  std::size_t plane_neighbors = kDefaultPlaneNeighbors;
  bool downsample = true;    // false when the input is already at `resolution`
};

struct AxisBox {
  Vec3 min = Vec3::Constant(kInf);
  Vec3 max = Vec3::Constant(-kInf);

  void extend(const Vec3& p) {
    min = min.cwiseMin(p);
    max = max.cwiseMax(p);
  }
  bool valid() const { return (min.array() <= max.array()).all(); }
  bool contains(const Vec3& p) const { return (p.array() >= min.array()).all() && (p.array() <= max.array()).all(); }
};

/// Preprocessed, immutable environment map. Points are stored in voxel order so
/// every voxel's index list is a contiguous run.
class PointMap {
public:
  PointMap() = default;

  static PointMap build(const RawCloud& cloud, const MapParams& params,
                        unsigned threads = default_thread_count()) {
    require_positive(params.resolution, "r_map");
    require_positive(params.voxel_edge, "voxel_edge");
    if (params.voxel_edge < params.resolution)
      throw ParameterError("voxel_edge", "must be >= r_map");
    PointMap map;
    map.resolution_ = params.resolution;
    map.voxel_edge_ = params.voxel_edge;
    const auto start = std::chrono::steady_clock::now();
    const RawCloud reduced = params.downsample ? downsample(cloud, params.resolution) : cloud;
    if (reduced.empty()) {
      map.voxels_ = build_voxel_index({}, params.voxel_edge);
      return map;
    }
    // reorder so voxel lists are contiguous
    const auto grouping = build_voxel_index(reduced.points, params.voxel_edge);
    map.points_.reserve(reduced.size());
    for (const auto& [key, range] : grouping.cells)
      for (auto i : grouping.points_in(range)) map.points_.push_back(reduced.points[i]);
    map.voxels_ = build_voxel_index(map.points_, params.voxel_edge);
    for (const auto& p : map.points_) map.bounds_.extend(p);
    map.tree_ = std::make_shared<const KdIndex>(map.points_);
    if (map.points_.size() >= params.plane_neighbors) {
      auto fits = fit_point_planes(map.points_, *map.tree_, params.plane_neighbors, threads);
      map.normals_ = std::move(fits.normals);
      map.plane_quality_ = std::move(fits.plane_quality);
      map.crease_ = std::move(fits.crease);
    } else {
      map.normals_.assign(map.points_.size(), Vec3::UnitZ());
      map.plane_quality_.assign(map.points_.size(), kInf);
      map.crease_.assign(map.points_.size(), 1);
    }
    map.preprocess_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return map;
  }

  /// Reassembles a map from stored arrays (cache load). Rebuilds the indices.
  static PointMap from_parts(double resolution, double voxel_edge, PointList points, std::vector<Vec3> normals,
                             std::vector<double> plane_quality, std::vector<std::uint8_t> crease = {}) {
    if (crease.empty()) crease.assign(points.size(), 0);
    if (normals.size() != points.size() || plane_quality.size() != points.size() || crease.size() != points.size())
      throw Error("point map arrays have mismatched lengths");
    PointMap map;
    map.resolution_ = resolution;
    map.voxel_edge_ = voxel_edge;
    map.points_ = std::move(points);
    map.normals_ = std::move(normals);
    map.plane_quality_ = std::move(plane_quality);
    map.crease_ = std::move(crease);
    map.voxels_ = build_voxel_index(map.points_, voxel_edge);
    for (const auto& p : map.points_) map.bounds_.extend(p);
    if (!map.points_.empty()) map.tree_ = std::make_shared<const KdIndex>(map.points_);
    return map;
  }

  const PointList& points() const { return points_; }
  const std::vector<Vec3>& normals() const { return normals_; }
  const std::vector<double>& plane_quality() const { return plane_quality_; }
  /// 1 where the neighborhood spans several planes (edges, corners); such points
  /// are rendered without plane correction.
  const std::vector<std::uint8_t>& crease() const { return crease_; }
  const VoxelIndex& voxels() const { return voxels_; }
  const AxisBox& bounds() const { return bounds_; }
  double resolution() const { return resolution_; }
  double voxel_edge() const { return voxel_edge_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  double preprocess_seconds() const { return preprocess_seconds_; }

  /// Static KD-tree over the map points; null for an empty map.
  const KdIndex* tree() const { return tree_.get(); }

private:
  double resolution_ = 0.1;
  double voxel_edge_ = 5.0;
  PointList points_;
  std::vector<Vec3> normals_;
  std::vector<double> plane_quality_;
  std::vector<std::uint8_t> crease_;
  VoxelIndex voxels_;
  AxisBox bounds_;
  std::shared_ptr<const KdIndex> tree_;
  double preprocess_seconds_ = 0.0;
};

// Preprocessed-map cache, little-endian:
//   "PMAP" | version u32 | r_map f64 | l f64 | count u64 |
//   count x (x,y,z f64) | count x (nx,ny,nz f64) | count x gamma f64 | count x crease u8
inline constexpr std::uint32_t kMapCacheVersion = 2;

namespace detail {

static_assert(std::endian::native == std::endian::little, "map cache I/O assumes a little-endian host");

template <typename T>
void put(std::string& out, T v) {
  const auto* raw = reinterpret_cast<const char*>(&v);
  out.append(raw, sizeof(T));
}

template <typename T>
T take(std::string_view in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw ParseError(pos, "map cache is truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

inline std::string write_map_cache(const PointMap& map) {
  std::string out = "PMAP";
  detail::put<std::uint32_t>(out, kMapCacheVersion);
  detail::put<double>(out, map.resolution());
  detail::put<double>(out, map.voxel_edge());
  detail::put<std::uint64_t>(out, map.size());
  out.reserve(out.size() + map.size() * 7 * sizeof(double));
  for (const auto& p : map.points())
    for (int a = 0; a < 3; ++a) detail::put<double>(out, p[a]);
  for (const auto& n : map.normals())
    for (int a = 0; a < 3; ++a) detail::put<double>(out, n[a]);
  for (double g : map.plane_quality()) detail::put<double>(out, g);
  for (auto c : map.crease()) detail::put<std::uint8_t>(out, c);
  return out;
}

inline PointMap read_map_cache(std::string_view in) {
  if (in.substr(0, 4) != "PMAP") throw ParseError(0, "map cache magic 'PMAP' missing");
  std::size_t pos = 4;
  const auto version = detail::take<std::uint32_t>(in, pos);
  if (version != kMapCacheVersion) throw ParseError(4, "unsupported map cache version " + std::to_string(version));
  const double resolution = detail::take<double>(in, pos);
  const double edge = detail::take<double>(in, pos);
  const auto count = detail::take<std::uint64_t>(in, pos);
  if ((in.size() - pos) / (7 * sizeof(double) + 1) < count) throw ParseError(pos, "map cache is truncated");
  PointList points(count);
  std::vector<Vec3> normals(count);
  std::vector<double> gamma(count);
  for (auto& p : points)
    for (int a = 0; a < 3; ++a) p[a] = detail::take<double>(in, pos);
  for (auto& n : normals)
    for (int a = 0; a < 3; ++a) n[a] = detail::take<double>(in, pos);
  for (auto& g : gamma) g = detail::take<double>(in, pos);
  std::vector<std::uint8_t> crease(count);
  for (auto& c : crease) c = detail::take<std::uint8_t>(in, pos);
  return PointMap::from_parts(resolution, edge, std::move(points), std::move(normals), std::move(gamma),
                              std::move(crease));
}

}  // namespace lidarsim
