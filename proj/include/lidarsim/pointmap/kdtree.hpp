#pragma once

#include "lidarsim/common.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <span>

namespace lidarsim {

/// Static balanced KD-tree over a copied point list. The tree is implicit: node
/// [lo, hi) splits at its median slot, children are [lo, mid) and [mid+1, hi).
class KdIndex {
public:
  struct Neighbor {
    std::uint32_t index;
    double distance;
  };

  KdIndex() = default;

  explicit KdIndex(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    axis_.assign(points_.size(), 0);
    build(0, order_.size());
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const PointList& points() const { return points_; }

  /// Indices i with |p_i - center| <= radius, ascending.
  std::vector<std::uint32_t> radius_query(const Vec3& center, double radius) const {
    std::vector<std::uint32_t> out;
    if (radius < 0.0 || empty()) return out;
    radius_rec(0, order_.size(), center, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool any_within(const Vec3& center, double radius) const {
    if (radius < 0.0 || empty()) return false;
    return any_rec(0, order_.size(), center, radius * radius);
  }

  /// Closest point; ties resolve to the lower index. Requires a non-empty tree.
  Neighbor nearest(const Vec3& center) const {
    Neighbor best{0, kInf};
    double best_sq = kInf;
    nearest_rec(0, order_.size(), center, best.index, best_sq);
    best.distance = std::sqrt(best_sq);
    return best;
  }

  /// k closest points ordered by (distance, index).
  std::vector<Neighbor> knn(const Vec3& center, std::size_t k) const {
    k = std::min(k, size());
    std::vector<Neighbor> out;
    if (k == 0) return out;
    // max-heap on (dist_sq, index)
    std::priority_queue<std::pair<double, std::uint32_t>> heap;
    knn_rec(0, order_.size(), center, k, heap);
    out.resize(heap.size());
    for (std::size_t i = out.size(); i-- > 0;) {
      out[i] = {heap.top().second, std::sqrt(heap.top().first)};
      heap.pop();
    }
    return out;
  }

private:
  static constexpr std::size_t kLeafSize = 8;

  void build(std::size_t lo, std::size_t hi) {
    if (hi - lo <= kLeafSize) return;
    Vec3 mn = Vec3::Constant(kInf), mx = Vec3::Constant(-kInf);
    for (std::size_t i = lo; i < hi; ++i) {
      mn = mn.cwiseMin(points_[order_[i]]);
      mx = mx.cwiseMax(points_[order_[i]]);
    }
    Vec3 extent = mx - mn;
    int axis = 0;
    extent.maxCoeff(&axis);
    const std::size_t mid = lo + (hi - lo) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    axis_[mid] = static_cast<std::uint8_t>(axis);
    build(lo, mid);
    build(mid + 1, hi);
  }

  double dist_sq(std::uint32_t i, const Vec3& c) const { return (points_[i] - c).squaredNorm(); }

  void radius_rec(std::size_t lo, std::size_t hi, const Vec3& c, double r2, std::vector<std::uint32_t>& out) const {
    if (hi - lo <= kLeafSize) {
      for (std::size_t i = lo; i < hi; ++i)
        if (dist_sq(order_[i], c) <= r2) out.push_back(order_[i]);
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const std::uint32_t node = order_[mid];
    const int axis = axis_[mid];
    const double diff = c[axis] - points_[node][axis];
    if (dist_sq(node, c) <= r2) out.push_back(node);
    if (diff <= 0.0 || diff * diff <= r2) radius_rec(lo, mid, c, r2, out);
    if (diff >= 0.0 || diff * diff <= r2) radius_rec(mid + 1, hi, c, r2, out);
  }

  bool any_rec(std::size_t lo, std::size_t hi, const Vec3& c, double r2) const {
    if (hi - lo <= kLeafSize) {
      for (std::size_t i = lo; i < hi; ++i)
        if (dist_sq(order_[i], c) <= r2) return true;
      return false;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const int axis = axis_[mid];
    const double diff = c[axis] - points_[order_[mid]][axis];
    if (dist_sq(order_[mid], c) <= r2) return true;
    if ((diff <= 0.0 || diff * diff <= r2) && any_rec(lo, mid, c, r2)) return true;
    return (diff >= 0.0 || diff * diff <= r2) && any_rec(mid + 1, hi, c, r2);
  }

  void consider(std::uint32_t i, const Vec3& c, std::uint32_t& best, double& best_sq) const {
    const double d = dist_sq(i, c);
    if (d < best_sq || (d == best_sq && i < best)) {
      best_sq = d;
      best = i;
    }
  }

  void nearest_rec(std::size_t lo, std::size_t hi, const Vec3& c, std::uint32_t& best, double& best_sq) const {
    if (hi - lo <= kLeafSize) {
      for (std::size_t i = lo; i < hi; ++i) consider(order_[i], c, best, best_sq);
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const int axis = axis_[mid];
    const double diff = c[axis] - points_[order_[mid]][axis];
    consider(order_[mid], c, best, best_sq);
    const bool left_first = diff <= 0.0;
    if (left_first)
      nearest_rec(lo, mid, c, best, best_sq);
    else
      nearest_rec(mid + 1, hi, c, best, best_sq);
    if (diff * diff <= best_sq) {
      if (left_first)
        nearest_rec(mid + 1, hi, c, best, best_sq);
      else
        nearest_rec(lo, mid, c, best, best_sq);
    }
  }

  using Heap = std::priority_queue<std::pair<double, std::uint32_t>>;

  static void push_heap(Heap& heap, std::size_t k, double d, std::uint32_t i) {
    if (heap.size() < k) {
      heap.emplace(d, i);
    } else if (std::make_pair(d, i) < heap.top()) {
      heap.pop();
      heap.emplace(d, i);
    }
  }

  void knn_rec(std::size_t lo, std::size_t hi, const Vec3& c, std::size_t k, Heap& heap) const {
    if (hi - lo <= kLeafSize) {
      for (std::size_t i = lo; i < hi; ++i) push_heap(heap, k, dist_sq(order_[i], c), order_[i]);
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    const int axis = axis_[mid];
    const double diff = c[axis] - points_[order_[mid]][axis];
    push_heap(heap, k, dist_sq(order_[mid], c), order_[mid]);
    const bool left_first = diff <= 0.0;
    if (left_first)
      knn_rec(lo, mid, c, k, heap);
    else
      knn_rec(mid + 1, hi, c, k, heap);
    if (heap.size() < k || diff * diff <= heap.top().first) {
      if (left_first)
        knn_rec(mid + 1, hi, c, k, heap);
      else
        knn_rec(lo, mid, c, k, heap);
    }
  }

  PointList points_;
  std::vector<std::uint32_t> order_;
  std::vector<std::uint8_t> axis_;
};

}  // namespace lidarsim
