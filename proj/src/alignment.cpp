#include "clouddelta/alignment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "clouddelta/kdtree.hpp"

namespace clouddelta {

PointCloud merge_maps(const PointCloud& m_t, const PointCloud& m_t1,
                      const RigidTransform& t) {
  PointCloud merged;
  merged.reserve(m_t.size() + m_t1.size());
  merged.insert(merged.end(), m_t.begin(), m_t.end());
  for (const Point3& p : m_t1) merged.push_back(t.apply(p));
  return merged;
}

namespace {

// Least-squares rotation+translation from paired points (orthogonal
// Procrustes with the reflection guard). Throws when the pairs do not span
// at least a plane.
RigidTransform solve_procrustes(const std::vector<Point3>& src,
                                const std::vector<Point3>& dst) {
  Point3 src_mean = Point3::Zero();
  Point3 dst_mean = Point3::Zero();
  for (const Point3& p : src) src_mean += p;
  for (const Point3& p : dst) dst_mean += p;
  double inv_n = 1.0 / static_cast<double>(src.size());
  src_mean *= inv_n;
  dst_mean *= inv_n;

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (size_t i = 0; i < src.size(); ++i) {
    cov += (src[i] - src_mean) * (dst[i] - dst_mean).transpose();
  }

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(
      cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw DegenerateGeometryError(
        "correspondences are collinear, rotation is underdetermined");
  }

  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, (v * u.transpose()).determinant());
  Eigen::Matrix3d rotation = v * d.asDiagonal() * u.transpose();
  return {rotation, dst_mean - rotation * src_mean};
}

}  // namespace

AlignmentResult estimate_transform_icp(const PointCloud& source,
                                       const PointCloud& target,
                                       const IcpOptions& options) {
  if (source.size() < 3 || target.size() < 3) {
    throw DegenerateGeometryError("ICP needs at least 3 points per cloud");
  }

  KdTree<3> target_tree(target);

  // Deterministic stride subsample keeps per-iteration cost bounded on
  // large maps without biasing toward any part of the cloud.
  std::vector<Point3> src_pts;
  if (options.max_source_points > 0 &&
      static_cast<int>(source.size()) > options.max_source_points) {
    size_t stride = (source.size() + static_cast<size_t>(options.max_source_points) - 1) /
                    static_cast<size_t>(options.max_source_points);
    src_pts.reserve(source.size() / stride + 1);
    for (size_t i = 0; i < source.size(); i += stride) src_pts.push_back(source[i]);
  } else {
    src_pts = source;
  }

  AlignmentResult result;
  result.transform = options.initial;
  double prev_rmse = std::numeric_limits<double>::infinity();
  double max_d2 = options.max_corr_dist * options.max_corr_dist;

  std::vector<Point3> matched_src, matched_dst;
  std::vector<double> dists2;

  // One correspondence-and-solve step. A positive gate drops pairs whose
  // residual exceeds gate * median residual; matches stay in source order
  // throughout, so the solver's summation order is reproducible.
  auto step = [&](double gate) {
    matched_src.clear();
    matched_dst.clear();
    dists2.clear();
    for (const Point3& s : src_pts) {
      Point3 moved = result.transform.apply(s);
      auto hit = target_tree.nearest(moved);
      double d2 = (moved - target[static_cast<size_t>(hit.index)]).squaredNorm();
      if (d2 > max_d2) continue;
      matched_src.push_back(s);
      matched_dst.push_back(target[static_cast<size_t>(hit.index)]);
      dists2.push_back(d2);
    }
    if (gate > 0.0 && matched_src.size() >= 3) {
      std::vector<double> sorted = dists2;
      std::nth_element(sorted.begin(), sorted.begin() + static_cast<long>(sorted.size() / 2),
                       sorted.end());
      double cutoff = gate * gate * sorted[sorted.size() / 2];
      std::vector<Point3> kept_src, kept_dst;
      for (size_t i = 0; i < matched_src.size(); ++i) {
        if (dists2[i] <= cutoff) {
          kept_src.push_back(matched_src[i]);
          kept_dst.push_back(matched_dst[i]);
        }
      }
      if (kept_src.size() >= 3) {
        matched_src.swap(kept_src);
        matched_dst.swap(kept_dst);
      }
    }
    if (matched_src.size() < 3) {
      throw DegenerateGeometryError(
          "fewer than 3 correspondences within the matching distance");
    }

    result.transform = solve_procrustes(matched_src, matched_dst);

    double sq_sum = 0.0;
    for (size_t i = 0; i < matched_src.size(); ++i) {
      sq_sum += (result.transform.apply(matched_src[i]) - matched_dst[i]).squaredNorm();
    }
    double rmse = std::sqrt(sq_sum / static_cast<double>(matched_src.size()));
    result.rmse_trace.push_back(rmse);
    result.residual_rmse = rmse;
    result.iterations += 1;
    return rmse;
  };

  // Coarse phase with every correspondence retained. Gating too early lets
  // a self-similar structure slide to a tight-but-wrong fit, so the
  // full-data fixed point comes first and the gated refinement below only
  // polishes it by dropping matches that have no true counterpart.
  result.iterations = 0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double rmse = step(0.0);
    if (std::abs(prev_rmse - rmse) < options.convergence_eps) {
      result.converged = true;
      break;
    }
    prev_rmse = rmse;
  }

  if (options.refine_gate > 0.0) {
    result.converged = false;
    prev_rmse = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      double rmse = step(options.refine_gate);
      if (std::abs(prev_rmse - rmse) < options.convergence_eps) {
        result.converged = true;
        break;
      }
      prev_rmse = rmse;
    }
  }
  return result;
}

}  // namespace clouddelta
