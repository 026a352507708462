#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "clouddelta/types.hpp"

namespace clouddelta {

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t);
Trajectory apply_transform(const Trajectory& trajectory, const RigidTransform& t);

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return a * b;
}

inline RigidTransform inverse(const RigidTransform& t) { return t.inverse(); }

// Linear-scan spherical crop. The reference implementation every spatial
// index in this library has to agree with.
SphereRegion sample_sphere(const PointCloud& map, const Point3& center,
                           double radius);

// Uniform hash grid over a fixed cloud for repeated sphere queries.
// Results are identical to sample_sphere on the same cloud, including
// point order.
class SphereSampler {
 public:
  SphereSampler(const PointCloud& map, double cell_size);

  SphereRegion sample(const Point3& center, double radius) const;

  double cell_size() const { return cell_size_; }

 private:
  const PointCloud& map_;
  double cell_size_;
  std::unordered_map<int64_t, std::vector<int>> cells_;
};

// Packs a signed 3-d cell index into one 64-bit key, 21 bits per axis.
// Collision-free for |i| < 2^20, plenty for any metric-scale map.
int64_t pack_cell(int ix, int iy, int iz);

}  // namespace clouddelta
