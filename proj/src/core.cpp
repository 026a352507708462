#include "clouddelta/core.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace clouddelta {

double rotation_defect(const Eigen::Matrix3d& rotation) {
  Eigen::Matrix3d gram = rotation.transpose() * rotation;
  double defect = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return std::max(defect, std::abs(rotation.determinant() - 1.0));
}

RigidTransform RigidTransform::from_parts(const Eigen::Matrix3d& rotation,
                                          const Eigen::Vector3d& translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw FormatError("rigid transform has non-finite entries");
  }
  double defect = rotation_defect(rotation);
  if (defect > kOrthonormalityTol) {
    std::ostringstream msg;
    msg << "rotation block is not a proper rotation (defect " << defect
        << ", tolerance " << kOrthonormalityTol << ")";
    throw FormatError(msg.str());
  }
  return {rotation, translation};
}

RigidTransform RigidTransform::from_matrix(const Eigen::Matrix4d& m) {
  Eigen::RowVector4d bottom = m.row(3);
  if (bottom != Eigen::RowVector4d(0, 0, 0, 1)) {
    throw FormatError("homogeneous transform must have bottom row 0 0 0 1");
  }
  return from_parts(m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>());
}

PointCloud apply_transform(const PointCloud& cloud, const RigidTransform& t) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const Point3& p : cloud) out.push_back(t.apply(p));
  return out;
}

Trajectory apply_transform(const Trajectory& trajectory, const RigidTransform& t) {
  Trajectory out;
  out.poses.reserve(trajectory.poses.size());
  for (const Point3& p : trajectory.poses) out.poses.push_back(t.apply(p));
  return out;
}

SphereRegion sample_sphere(const PointCloud& map, const Point3& center,
                           double radius) {
  SphereRegion region{center, radius, {}};
  double r2 = radius * radius;
  for (const Point3& p : map) {
    if ((p - center).squaredNorm() <= r2) region.points.push_back(p);
  }
  return region;
}

int64_t pack_cell(int ix, int iy, int iz) {
  constexpr int64_t kOffset = int64_t{1} << 20;
  constexpr int64_t kMask = (int64_t{1} << 21) - 1;
  return (((ix + kOffset) & kMask) << 42) | (((iy + kOffset) & kMask) << 21) |
         ((iz + kOffset) & kMask);
}

namespace {

inline int cell_coord(double v, double cell_size) {
  return static_cast<int>(std::floor(v / cell_size));
}

}  // namespace

SphereSampler::SphereSampler(const PointCloud& map, double cell_size)
    : map_(map), cell_size_(cell_size) {
  for (int i = 0; i < static_cast<int>(map.size()); ++i) {
    const Point3& p = map[static_cast<size_t>(i)];
    int64_t key = pack_cell(cell_coord(p.x(), cell_size_),
                            cell_coord(p.y(), cell_size_),
                            cell_coord(p.z(), cell_size_));
    cells_[key].push_back(i);
  }
}

SphereRegion SphereSampler::sample(const Point3& center, double radius) const {
  SphereRegion region{center, radius, {}};
  double r2 = radius * radius;

  int x0 = cell_coord(center.x() - radius, cell_size_);
  int x1 = cell_coord(center.x() + radius, cell_size_);
  int y0 = cell_coord(center.y() - radius, cell_size_);
  int y1 = cell_coord(center.y() + radius, cell_size_);
  int z0 = cell_coord(center.z() - radius, cell_size_);
  int z1 = cell_coord(center.z() + radius, cell_size_);

  std::vector<int> candidates;
  for (int ix = x0; ix <= x1; ++ix) {
    for (int iy = y0; iy <= y1; ++iy) {
      for (int iz = z0; iz <= z1; ++iz) {
        auto it = cells_.find(pack_cell(ix, iy, iz));
        if (it == cells_.end()) continue;
        candidates.insert(candidates.end(), it->second.begin(),
                          it->second.end());
      }
    }
  }
  // Candidates come out in hash order; restore map order so the result is
  // indistinguishable from a linear scan.
  std::sort(candidates.begin(), candidates.end());

  for (int i : candidates) {
    const Point3& p = map_[static_cast<size_t>(i)];
    if ((p - center).squaredNorm() <= r2) region.points.push_back(p);
  }
  return region;
}

}  // namespace clouddelta
