#pragma once

#include <Eigen/Core>
#include <vector>

#include "clouddelta/errors.hpp"

namespace clouddelta {

using Point3 = Eigen::Vector3d;
using PointCloud = std::vector<Point3>;

// Sensor poses of one mapping session, ordered along the path.
// Pose indices are 1-based: they double as the join key between
// trajectory files, descriptor files, and change scores.
struct Trajectory {
  std::vector<Point3> poses;

  int count() const { return static_cast<int>(poses.size()); }

  const Point3& pose(int k) const { return poses[static_cast<size_t>(k) - 1]; }
  Point3& pose(int k) { return poses[static_cast<size_t>(k) - 1]; }
};

// Rigid-body motion in SE(3). Construction through from_parts / from_matrix
// rejects matrices that are not proper rotations, so a value of this type
// can be assumed rigid everywhere downstream.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static constexpr double kOrthonormalityTol = 1e-9;

  static RigidTransform identity() { return {}; }

  // Throws FormatError unless R^T R = I and det R = 1 within tolerance.
  static RigidTransform from_parts(const Eigen::Matrix3d& rotation,
                                   const Eigen::Vector3d& translation);

  // Accepts a 4x4 homogeneous matrix whose bottom row is exactly 0 0 0 1.
  static RigidTransform from_matrix(const Eigen::Matrix4d& m);

  Point3 apply(const Point3& p) const { return rotation * p + translation; }

  Point3 operator*(const Point3& p) const { return apply(p); }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }

  RigidTransform inverse() const {
    Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

// Largest deviation of R from a proper rotation: max over the entries of
// |R^T R - I| and |det R - 1|. Used by validation and by tests.
double rotation_defect(const Eigen::Matrix3d& rotation);

// All map points within `radius` of `center` (closed ball), in map order.
struct SphereRegion {
  Point3 center = Point3::Zero();
  double radius = 0.0;
  PointCloud points;
};

}  // namespace clouddelta
