#pragma once

#include "lidarsim/common.hpp"
#include "lidarsim/parallel.hpp"
#include "lidarsim/pointmap/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <optional>

namespace lidarsim {

inline constexpr std::size_t kDefaultPlaneNeighbors = 10;
inline constexpr double kDefaultPlanarityThreshold = 0.05;  // m

struct PlaneFits {
  std::vector<Vec3> normals;
  std::vector<double> plane_quality;  // plane thickness, +inf when degenerate
  std::vector<std::uint8_t> crease;   // 1 when no single plane dominates the neighborhood
};

struct PlaneFit {
  Vec3 normal = Vec3::UnitZ();
  double thickness = kInf;
};

/// Normal sign convention: z >= 0, ties broken by y >= 0, then x >= 0.
inline Vec3 canonical_normal(Vec3 n) {
  constexpr double tie = 1e-12;
  double key = n.z();
  if (std::abs(key) <= tie) key = n.y();
  if (std::abs(key) <= tie) key = n.x();
  return key < 0.0 ? Vec3(-n) : n;
}

/// Least-squares plane of a neighborhood: thickness is the square root of the
/// smallest covariance eigenvalue. Collinear or coincident neighborhoods get an
/// infinite thickness.
inline PlaneFit fit_plane(std::span<const Vec3> neighborhood) {
  PlaneFit fit;
  if (neighborhood.size() < 3) return fit;
  Vec3 mean = Vec3::Zero();
  for (const auto& p : neighborhood) mean += p;
  mean /= static_cast<double>(neighborhood.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : neighborhood) {
    const Vec3 d = p - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(neighborhood.size());
  Eigen::SelfAdjointEigenSolver<Mat3> solver(cov);
  const Vec3 ev = solver.eigenvalues();  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-9 * ev(2)) return fit;
  fit.normal = canonical_normal(solver.eigenvectors().col(0).normalized());
  fit.thickness = std::sqrt(std::max(0.0, ev(0)));
  return fit;
}

/// Minimum |cos| between the best two-neighbor plane and the least-squares plane
/// for a noisy neighborhood to count as one surface. A chamfer across a crease
/// sits far from both faces.
inline constexpr double kCreaseAgreementCos = 0.97;

namespace detail {

/// Number of points within `tol` of the plane (origin, normal) and their summed distance.
inline std::pair<std::size_t, double> plane_inliers(std::span<const Vec3> pts, const Vec3& origin, const Vec3& n,
                                                    double tol) {
  std::size_t count = 0;
  double residual = 0.0;
  for (const auto& q : pts) {
    const double r = std::abs(n.dot(q - origin));
    if (r <= tol) {
      ++count;
      residual += r;
    }
  }
  return {count, residual};
}

}  // namespace detail

/// Normal of the dominant plane in a neighborhood that may span a crease (box
/// edge, wall corner). Planes through `center` and two neighbors are scored by
/// the points within half the thickness; the best one wins if it holds half the
/// neighborhood. Otherwise the least-squares plane is kept when half the points
/// lie within one thickness of it and it agrees with the best two-neighbor
/// plane (a noisy but single surface). Empty when
/// neither holds: the point sits on a crease.
inline std::optional<Vec3> dominant_plane_normal(std::span<const Vec3> hood, const Vec3& center,
                                                 const PlaneFit& fit) {
  if (!std::isfinite(fit.thickness) || fit.thickness <= 1e-9 || hood.size() < 4) return fit.normal;
  const std::size_t n = hood.size();
  const double tol = 0.5 * fit.thickness;
  std::size_t best_count = 0;
  double best_residual = kInf;
  Vec3 best_normal = fit.normal;
  for (std::size_t a = 0; a < n; ++a) {
    const Vec3 ea = hood[a] - center;
    if (ea.squaredNorm() == 0.0) continue;
    for (std::size_t b = a + 1; b < n; ++b) {
      const Vec3 eb = hood[b] - center;
      Vec3 nrm = ea.cross(eb);
      const double len = nrm.norm();
      if (!(len > 0.2 * ea.norm() * eb.norm())) continue;  // nearly collinear
      nrm /= len;
      const auto [count, residual] = detail::plane_inliers(hood, center, nrm, tol);
      if (count > best_count || (count == best_count && residual < best_residual)) {
        best_count = count;
        best_residual = residual;
        best_normal = nrm;
      }
    }
  }
  if (2 * best_count >= n && best_count >= 4) {
    std::vector<Vec3> inliers;
    inliers.reserve(best_count);
    for (const auto& q : hood)
      if (std::abs(best_normal.dot(q - center)) <= tol) inliers.push_back(q);
    const auto refit = fit_plane(inliers);
    return std::isfinite(refit.thickness) ? refit.normal : canonical_normal(best_normal);
  }
  Vec3 mean = Vec3::Zero();
  for (const auto& q : hood) mean += q;
  mean /= static_cast<double>(n);
  const bool agrees = std::abs(best_normal.dot(fit.normal)) >= kCreaseAgreementCos;
  if (agrees && 2 * detail::plane_inliers(hood, mean, fit.normal, fit.thickness).first >= n) return fit.normal;
  return std::nullopt;
}

inline PlaneFits fit_point_planes(std::span<const Vec3> points, const KdIndex& tree,
                                  std::size_t k_neighbors = kDefaultPlaneNeighbors,
                                  unsigned threads = default_thread_count()) {
  if (k_neighbors < 4) throw ParameterError("k_neighbors", "must be >= 4");
  if (points.size() < k_neighbors) throw ParameterError("k_neighbors", "cloud has fewer points than k_neighbors");
  PlaneFits fits;
  fits.normals.resize(points.size());
  fits.plane_quality.resize(points.size());
  fits.crease.resize(points.size());
  parallel_chunks(points.size(), threads, [&](unsigned, std::size_t begin, std::size_t end) {
    const std::size_t wide = std::min(points.size(), 2 * k_neighbors);
    std::vector<Vec3> hood;
    for (std::size_t i = begin; i < end; ++i) {
      const auto nn = tree.knn(points[i], wide);
      hood.clear();
      for (const auto& nb : nn) hood.push_back(tree.points()[nb.index]);
      const auto fit = fit_plane(std::span<const Vec3>(hood).first(k_neighbors));
      const auto dominant = dominant_plane_normal(hood, points[i], fit);
      fits.normals[i] = dominant.value_or(fit.normal);
      fits.crease[i] = dominant ? 0 : 1;
      fits.plane_quality[i] = fit.thickness;
    }
  });
  return fits;
}

inline PlaneFits fit_point_planes(std::span<const Vec3> points, std::size_t k_neighbors = kDefaultPlaneNeighbors) {
  KdIndex tree(points);
  return fit_point_planes(points, tree, k_neighbors);
}

}  // namespace lidarsim
