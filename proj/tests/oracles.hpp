// Independent reference implementations the production code is checked
// against. Everything here favours the most literal formulation over speed
// and shares no code with the library internals it verifies.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>
#include <vector>

#include "clouddelta/types.hpp"

namespace oracle {

using clouddelta::Point3;
using clouddelta::PointCloud;

// Homogeneous 4x4 application, independent of RigidTransform::apply.
inline Point3 transform_point(const Eigen::Matrix4d& m, const Point3& p) {
  Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
  Eigen::Vector4d out = m * h;
  return {out.x(), out.y(), out.z()};
}

inline std::vector<int> sphere_members(const PointCloud& map, const Point3& center,
                                       double radius) {
  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(map.size()); ++i) {
    double dx = map[i].x() - center.x();
    double dy = map[i].y() - center.y();
    double dz = map[i].z() - center.z();
    if (dx * dx + dy * dy + dz * dz <= radius * radius) idx.push_back(i);
  }
  return idx;
}

// First-wins linear nearest neighbour over arbitrary-dimension vectors.
template <typename Vec>
int nearest_linear(const std::vector<Vec>& pts, const Vec& q, double* dist = nullptr) {
  int best = 0;
  double best_d2 = (pts[0] - q).squaredNorm();
  for (int i = 1; i < static_cast<int>(pts.size()); ++i) {
    double d2 = (pts[i] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  if (dist) *dist = std::sqrt(best_d2);
  return best;
}

// All (distance, index) pairs sorted ascending; callers slice the front.
template <typename Vec>
std::vector<std::pair<double, int>> knn_sorted(const std::vector<Vec>& pts,
                                               const Vec& q) {
  std::vector<std::pair<double, int>> all;
  for (int i = 0; i < static_cast<int>(pts.size()); ++i) {
    all.push_back({std::sqrt((pts[i] - q).squaredNorm()), i});
  }
  std::sort(all.begin(), all.end());
  return all;
}

// Descriptor bin of one point, spelled out step by step.
inline int descriptor_bin(const Point3& p, const Point3& center, double radius,
                          int radial_bins, int height_bins, double height_extent) {
  double dx = p.x() - center.x();
  double dy = p.y() - center.y();
  double horizontal = std::sqrt(dx * dx + dy * dy);
  int ring = static_cast<int>(horizontal / radius * radial_bins);
  if (ring > radial_bins - 1) ring = radial_bins - 1;

  double rel = (p.z() - center.z() + height_extent) / (2.0 * height_extent);
  int slab = static_cast<int>(std::floor(rel * height_bins));
  if (slab < 0) slab = 0;
  if (slab > height_bins - 1) slab = height_bins - 1;
  return ring * height_bins + slab;
}

// Voxel occupancy tally over explicit integer triples.
inline std::map<std::tuple<int, int, int>, int> voxel_tally(
    const PointCloud& pts, const Point3& origin, double voxel) {
  std::map<std::tuple<int, int, int>, int> counts;
  for (const Point3& p : pts) {
    std::tuple<int, int, int> key(
        static_cast<int>(std::floor((p.x() - origin.x()) / voxel)),
        static_cast<int>(std::floor((p.y() - origin.y()) / voxel)),
        static_cast<int>(std::floor((p.z() - origin.z()) / voxel)));
    ++counts[key];
  }
  return counts;
}

// Statistical outlier filter, all-pairs version. Mirrors the production
// arithmetic order (sorted neighbour sum, then population stddev) so the
// results must agree bit for bit.
inline std::vector<bool> sor_keep_mask(const PointCloud& cloud, int k,
                                       double lambda) {
  int n = static_cast<int>(cloud.size());
  std::vector<bool> keep(n, true);
  if (n < k + 1) return keep;

  std::vector<double> means(n);
  for (int i = 0; i < n; ++i) {
    std::vector<std::pair<double, int>> dists;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      dists.push_back({std::sqrt((cloud[i] - cloud[j]).squaredNorm()), j});
    }
    std::sort(dists.begin(), dists.end());
    double sum = 0.0;
    for (int m = 0; m < k; ++m) sum += dists[m].first;
    means[i] = sum / static_cast<double>(k);
  }

  double mu = 0.0;
  for (double d : means) mu += d;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double d : means) var += (d - mu) * (d - mu);
  var /= static_cast<double>(n);
  double sigma = std::sqrt(var);

  for (int i = 0; i < n; ++i) {
    keep[i] = means[i] >= mu - lambda * sigma && means[i] <= mu + lambda * sigma;
  }
  return keep;
}

// ---------------------------------------------------------------------------
// Test data helpers

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

inline PointCloud random_cloud(std::mt19937_64& rng, int n, double extent = 10.0) {
  PointCloud cloud;
  cloud.reserve(n);
  for (int i = 0; i < n; ++i) {
    cloud.emplace_back(uniform(rng, -extent, extent), uniform(rng, -extent, extent),
                       uniform(rng, -extent, extent));
  }
  return cloud;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  Eigen::Quaterniond q(uniform(rng, -1, 1), uniform(rng, -1, 1),
                       uniform(rng, -1, 1), uniform(rng, -1, 1));
  while (q.norm() < 1e-3) {
    q = Eigen::Quaterniond(uniform(rng, -1, 1), uniform(rng, -1, 1),
                           uniform(rng, -1, 1), uniform(rng, -1, 1));
  }
  return q.normalized().toRotationMatrix();
}

inline clouddelta::RigidTransform random_transform(std::mt19937_64& rng,
                                                   double max_shift = 5.0) {
  return clouddelta::RigidTransform::from_parts(
      random_rotation(rng), Point3(uniform(rng, -max_shift, max_shift),
                                   uniform(rng, -max_shift, max_shift),
                                   uniform(rng, -max_shift, max_shift)));
}

inline Eigen::Matrix3d yaw_rotation(double angle_rad) {
  Eigen::Matrix3d r;
  r << std::cos(angle_rad), -std::sin(angle_rad), 0.0, std::sin(angle_rad),
      std::cos(angle_rad), 0.0, 0.0, 0.0, 1.0;
  return r;
}

}  // namespace oracle
