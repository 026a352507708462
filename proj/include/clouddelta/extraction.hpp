#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "clouddelta/core.hpp"
#include "clouddelta/detection.hpp"
#include "clouddelta/types.hpp"

namespace clouddelta {

// Occupancy grid over a sphere sample. Cell index of a point is
// floor((p - origin) / voxel_size) per axis; the origin sits at
// center - (radius, radius, radius) so the sphere fits in positive indices.
struct VoxelGrid {
  Point3 origin = Point3::Zero();
  double voxel_size = 0.0;
  int min_points = 1;
  std::unordered_map<int64_t, int> counts;

  Eigen::Vector3i index_of(const Point3& p) const;

  int count_at(const Eigen::Vector3i& idx) const;

  // A voxel counts as occupied once it holds at least min_points points.
  bool occupied(const Eigen::Vector3i& idx) const {
    return count_at(idx) >= min_points;
  }

  size_t occupied_count() const;
};

VoxelGrid voxelize(const SphereRegion& region, double voxel_size,
                   int min_points = 1);

// Points of `query` that fall into voxels of `reference` holding fewer than
// min_points reference points. With an empty reference every query point
// comes back. Query order is preserved.
PointCloud extract_object(const SphereRegion& reference,
                          const SphereRegion& query, double voxel_size,
                          int min_points = 1);

// Statistical outlier removal: a point survives when its mean distance to
// its k nearest neighbours lies inside [mu - lambda*sigma, mu + lambda*sigma],
// where mu and sigma are taken over all per-point mean distances. Clouds with
// fewer than k + 1 points pass through untouched.
struct SORConfig {
  int k_neighbors = 10;
  double lambda = 1.0;
};

PointCloud filter_outliers(const PointCloud& cloud, const SORConfig& config);

// Occupied-voxel volume at a fixed grid anchored at the coordinate origin.
double estimate_volume(const PointCloud& cloud, double resolution = 0.25);

enum class ChangeDirection { added, removed };

struct ExtractedObject {
  PointCloud points;                 // after outlier filtering
  int pre_filter_count = 0;          // points before outlier filtering
  ChangeDirection direction = ChangeDirection::added;
  double volume_estimate = 0.0;
};

struct ExtractionParams {
  double voxel_size = 0.65;
  int min_points_per_voxel = 1;
  SORConfig sor;
  double volume_resolution = 0.25;
  // Reference spheres are padded by one voxel so occupancy lookups near the
  // query boundary never read past the sampled data.
  double reference_padding() const { return voxel_size; }
};

// Everything extracted from one region pair, plus the sphere-level stats the
// report needs.
struct RegionExtraction {
  RegionPair region;
  ExtractedObject added;    // in m_t1 but not m_t
  ExtractedObject removed;  // in m_t but not m_t1
  long sphere_points = 0;   // |S_t| + |S_t1| at the sampling radius
  double sphere_volume = 0.0;
  double change_volume = 0.0;  // over added and removed points together
};

// Core comparison once the four sphere samples exist. `query_*` spheres use
// the pair radius; `ref_*` spheres must cover them (radius + padding).
RegionExtraction extract_region(const RegionPair& pair,
                                const SphereRegion& ref_t,
                                const SphereRegion& query_t,
                                const SphereRegion& ref_t1,
                                const SphereRegion& query_t1,
                                const ExtractionParams& params);

// Samples both maps around pair.center_t1 and runs the comparison both ways.
// m_t1_aligned must already be in the earlier session's frame.
RegionExtraction extract_all(const RegionPair& pair, const PointCloud& m_t,
                             const PointCloud& m_t1_aligned,
                             const ExtractionParams& params);

// Same, with prebuilt samplers over the two maps (cell size must be at
// least pair.radius + padding).
RegionExtraction extract_all(const RegionPair& pair, const SphereSampler& map_t,
                             const SphereSampler& map_t1_aligned,
                             const ExtractionParams& params);

}  // namespace clouddelta
