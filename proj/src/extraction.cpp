#include "clouddelta/extraction.hpp"

#include <cmath>
#include <unordered_set>

#include "clouddelta/kdtree.hpp"

namespace clouddelta {

Eigen::Vector3i VoxelGrid::index_of(const Point3& p) const {
  return {static_cast<int>(std::floor((p.x() - origin.x()) / voxel_size)),
          static_cast<int>(std::floor((p.y() - origin.y()) / voxel_size)),
          static_cast<int>(std::floor((p.z() - origin.z()) / voxel_size))};
}

int VoxelGrid::count_at(const Eigen::Vector3i& idx) const {
  auto it = counts.find(pack_cell(idx.x(), idx.y(), idx.z()));
  return it == counts.end() ? 0 : it->second;
}

size_t VoxelGrid::occupied_count() const {
  size_t n = 0;
  for (const auto& [key, count] : counts) {
    if (count >= min_points) ++n;
  }
  return n;
}

VoxelGrid voxelize(const SphereRegion& region, double voxel_size,
                   int min_points) {
  if (!(voxel_size > 0.0)) throw FormatError("voxel size must be positive");
  if (min_points < 1) throw FormatError("min points per voxel must be at least 1");
  VoxelGrid grid;
  grid.origin = region.center - Point3::Constant(region.radius);
  grid.voxel_size = voxel_size;
  grid.min_points = min_points;
  for (const Point3& p : region.points) {
    Eigen::Vector3i idx = grid.index_of(p);
    ++grid.counts[pack_cell(idx.x(), idx.y(), idx.z())];
  }
  return grid;
}

PointCloud extract_object(const SphereRegion& reference,
                          const SphereRegion& query, double voxel_size,
                          int min_points) {
  VoxelGrid grid = voxelize(reference, voxel_size, min_points);
  PointCloud novel;
  for (const Point3& p : query.points) {
    if (grid.count_at(grid.index_of(p)) < min_points) novel.push_back(p);
  }
  return novel;
}

PointCloud filter_outliers(const PointCloud& cloud, const SORConfig& config) {
  int n = static_cast<int>(cloud.size());
  if (config.k_neighbors < 1) throw FormatError("outlier filter needs k >= 1");
  if (n < config.k_neighbors + 1) return cloud;

  KdTree<3> tree(cloud);
  int k = config.k_neighbors;

  std::vector<double> mean_dist(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto hits = tree.knn(cloud[static_cast<size_t>(i)], k + 1);
    double sum = 0.0;
    bool self_skipped = false;
    int used = 0;
    for (const auto& hit : hits) {
      // Drop the query point itself. When duplicates push it out of the
      // result entirely, drop the first hit instead; it is an equidistant
      // duplicate, so the sum is unaffected.
      if (!self_skipped && (hit.index == i || used == k)) {
        self_skipped = true;
        continue;
      }
      sum += hit.distance;
      ++used;
    }
    mean_dist[static_cast<size_t>(i)] = sum / static_cast<double>(k);
  }

  double mu = 0.0;
  for (double d : mean_dist) mu += d;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double d : mean_dist) var += (d - mu) * (d - mu);
  var /= static_cast<double>(n);
  double sigma = std::sqrt(var);

  double lo = mu - config.lambda * sigma;
  double hi = mu + config.lambda * sigma;
  PointCloud kept;
  kept.reserve(cloud.size());
  for (int i = 0; i < n; ++i) {
    double d = mean_dist[static_cast<size_t>(i)];
    if (d >= lo && d <= hi) kept.push_back(cloud[static_cast<size_t>(i)]);
  }
  return kept;
}

double estimate_volume(const PointCloud& cloud, double resolution) {
  if (!(resolution > 0.0)) throw FormatError("volume resolution must be positive");
  std::unordered_set<int64_t> occupied;
  occupied.reserve(cloud.size());
  for (const Point3& p : cloud) {
    occupied.insert(pack_cell(static_cast<int>(std::floor(p.x() / resolution)),
                              static_cast<int>(std::floor(p.y() / resolution)),
                              static_cast<int>(std::floor(p.z() / resolution))));
  }
  return static_cast<double>(occupied.size()) * resolution * resolution *
         resolution;
}

namespace {

ExtractedObject finish_object(PointCloud raw, ChangeDirection direction,
                              const ExtractionParams& params) {
  ExtractedObject obj;
  obj.direction = direction;
  obj.pre_filter_count = static_cast<int>(raw.size());
  obj.points = filter_outliers(raw, params.sor);
  obj.volume_estimate = estimate_volume(obj.points, params.volume_resolution);
  return obj;
}

}  // namespace

RegionExtraction extract_region(const RegionPair& pair,
                                const SphereRegion& ref_t,
                                const SphereRegion& query_t,
                                const SphereRegion& ref_t1,
                                const SphereRegion& query_t1,
                                const ExtractionParams& params) {
  RegionExtraction out;
  out.region = pair;

  out.added = finish_object(
      extract_object(ref_t, query_t1, params.voxel_size,
                     params.min_points_per_voxel),
      ChangeDirection::added, params);
  out.removed = finish_object(
      extract_object(ref_t1, query_t, params.voxel_size,
                     params.min_points_per_voxel),
      ChangeDirection::removed, params);

  out.sphere_points = static_cast<long>(query_t.points.size()) +
                      static_cast<long>(query_t1.points.size());
  PointCloud both;
  both.reserve(query_t.points.size() + query_t1.points.size());
  both.insert(both.end(), query_t.points.begin(), query_t.points.end());
  both.insert(both.end(), query_t1.points.begin(), query_t1.points.end());
  out.sphere_volume = estimate_volume(both, params.volume_resolution);

  PointCloud change;
  change.reserve(out.added.points.size() + out.removed.points.size());
  change.insert(change.end(), out.added.points.begin(), out.added.points.end());
  change.insert(change.end(), out.removed.points.begin(), out.removed.points.end());
  out.change_volume = estimate_volume(change, params.volume_resolution);
  return out;
}

namespace {

// Inner sphere of a padded sample, preserving point order. Equivalent to
// sampling the map again at the smaller radius.
SphereRegion shrink(const SphereRegion& padded, double radius) {
  SphereRegion inner{padded.center, radius, {}};
  double r2 = radius * radius;
  for (const Point3& p : padded.points) {
    if ((p - padded.center).squaredNorm() <= r2) inner.points.push_back(p);
  }
  return inner;
}

RegionExtraction extract_from_refs(const RegionPair& pair, SphereRegion ref_t,
                                   SphereRegion ref_t1,
                                   const ExtractionParams& params) {
  SphereRegion query_t = shrink(ref_t, pair.radius);
  SphereRegion query_t1 = shrink(ref_t1, pair.radius);
  return extract_region(pair, ref_t, query_t, ref_t1, query_t1, params);
}

}  // namespace

RegionExtraction extract_all(const RegionPair& pair, const PointCloud& m_t,
                             const PointCloud& m_t1_aligned,
                             const ExtractionParams& params) {
  double ref_radius = pair.radius + params.reference_padding();
  return extract_from_refs(pair,
                           sample_sphere(m_t, pair.center_t1, ref_radius),
                           sample_sphere(m_t1_aligned, pair.center_t1, ref_radius),
                           params);
}

RegionExtraction extract_all(const RegionPair& pair, const SphereSampler& map_t,
                             const SphereSampler& map_t1_aligned,
                             const ExtractionParams& params) {
  double ref_radius = pair.radius + params.reference_padding();
  return extract_from_refs(pair, map_t.sample(pair.center_t1, ref_radius),
                           map_t1_aligned.sample(pair.center_t1, ref_radius),
                           params);
}

}  // namespace clouddelta
