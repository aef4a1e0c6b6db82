#pragma once

#include "lidarsim/common.hpp"
#include "lidarsim/pointmap/cloud_io.hpp"

#include <cmath>
#include <span>
#include <unordered_map>

namespace lidarsim {

struct VoxelKey {
  std::int32_t x = 0, y = 0, z = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    return static_cast<std::size_t>(static_cast<std::uint32_t>(k.x) * 73856093u ^
                                    static_cast<std::uint32_t>(k.y) * 19349669u ^
                                    static_cast<std::uint32_t>(k.z) * 83492791u);
  }
};

/// Half-open cells [k*edge, (k+1)*edge).
inline VoxelKey voxel_of(const Vec3& p, double edge) {
  return {static_cast<std::int32_t>(std::floor(p.x() / edge)), static_cast<std::int32_t>(std::floor(p.y() / edge)),
          static_cast<std::int32_t>(std::floor(p.z() / edge))};
}

inline Vec3 voxel_center(const VoxelKey& k, double edge) {
  return {(k.x + 0.5) * edge, (k.y + 0.5) * edge, (k.z + 0.5) * edge};
}

/// One point per occupied cube of edge `resolution`, placed at the cube center.
/// Output order follows the first occurrence of each cell in the input.
inline RawCloud downsample(const RawCloud& cloud, double resolution) {
  require_positive(resolution, "r_map");
  std::unordered_map<VoxelKey, std::uint8_t, VoxelKeyHash> seen;
  seen.reserve(cloud.size());
  RawCloud out;
  out.points.reserve(cloud.size() / 2);
  for (const auto& p : cloud.points) {
    const auto key = voxel_of(p, resolution);
    if (seen.emplace(key, 0).second) out.points.push_back(voxel_center(key, resolution));
  }
  return out;
}

/// Partition of point indices into cubes of edge `edge`. Indices of one voxel are
/// stored contiguously in `indices`; `cells` maps a voxel to its [begin, begin+count).
struct VoxelIndex {
  struct Range {
    std::uint32_t begin = 0;
    std::uint32_t count = 0;
  };

  double edge = 0.0;
  std::vector<std::uint32_t> indices;
  std::unordered_map<VoxelKey, Range, VoxelKeyHash> cells;

  std::span<const std::uint32_t> points_in(const Range& r) const { return {indices.data() + r.begin, r.count}; }

  std::span<const std::uint32_t> points_in(const VoxelKey& key) const {
    auto it = cells.find(key);
    if (it == cells.end()) return {};
    return points_in(it->second);
  }

  std::size_t voxel_count() const { return cells.size(); }
};

inline VoxelIndex build_voxel_index(std::span<const Vec3> points, double edge) {
  require_positive(edge, "voxel_edge");
  VoxelIndex index;
  index.edge = edge;
  std::vector<VoxelKey> keys(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    keys[i] = voxel_of(points[i], edge);
    ++index.cells[keys[i]].count;
  }
  std::uint32_t offset = 0;
  for (auto& [key, range] : index.cells) {
    range.begin = offset;
    offset += range.count;
    range.count = 0;
  }
  index.indices.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    auto& range = index.cells[keys[i]];
    index.indices[range.begin + range.count++] = static_cast<std::uint32_t>(i);
  }
  return index;
}

}  // namespace lidarsim
