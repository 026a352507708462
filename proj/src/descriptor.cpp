#include "clouddelta/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clouddelta/parallel.hpp"

namespace clouddelta {

void DescriptorConfig::validate() const {
  if (radial_bins <= 0 || height_bins <= 0 ||
      radial_bins * height_bins != kDescriptorDim) {
    std::ostringstream msg;
    msg << "descriptor layout " << radial_bins << "x" << height_bins
        << " does not give " << kDescriptorDim << " bins";
    throw FormatError(msg.str());
  }
  if (!(radius > 0.0) || !(height_extent > 0.0)) {
    throw FormatError("descriptor radius and height extent must be positive");
  }
}

const DescriptorRecord* DescriptorSet::find(int k) const {
  auto it = std::lower_bound(
      records.begin(), records.end(), k,
      [](const DescriptorRecord& r, int key) { return r.k < key; });
  if (it == records.end() || it->k != k) return nullptr;
  return &*it;
}

Descriptor compute_descriptor(const SphereRegion& region,
                              const DescriptorConfig& config) {
  config.validate();
  if (region.points.empty()) {
    throw EmptyRegionError("cannot describe an empty region");
  }

  Descriptor counts = Descriptor::Zero();
  double inv_radius = 1.0 / config.radius;
  double inv_height_span = 1.0 / (2.0 * config.height_extent);

  for (const Point3& p : region.points) {
    double dx = p.x() - region.center.x();
    double dy = p.y() - region.center.y();
    double radial = std::sqrt(dx * dx + dy * dy) * inv_radius;
    int bin_r = std::min(config.radial_bins - 1,
                         static_cast<int>(radial * config.radial_bins));

    double h = (p.z() - region.center.z() + config.height_extent) * inv_height_span;
    int bin_h = std::clamp(static_cast<int>(std::floor(h * config.height_bins)),
                           0, config.height_bins - 1);

    counts[bin_r * config.height_bins + bin_h] += 1.0;
  }
  return counts / counts.norm();
}

DescriptorSet compute_descriptor_set(const PointCloud& map,
                                     const Trajectory& trajectory,
                                     const DescriptorConfig& config,
                                     int threads) {
  config.validate();
  SphereSampler sampler(map, config.radius);

  int n = trajectory.count();
  std::vector<Descriptor> slots(static_cast<size_t>(n));
  std::vector<char> present(static_cast<size_t>(n), 0);

  parallel_for(n, threads, [&](int i) {
    SphereRegion region = sampler.sample(trajectory.pose(i + 1), config.radius);
    if (region.points.empty()) return;
    slots[static_cast<size_t>(i)] = compute_descriptor(region, config);
    present[static_cast<size_t>(i)] = 1;
  });

  DescriptorSet set;
  set.records.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (present[static_cast<size_t>(i)]) {
      set.records.push_back({i + 1, slots[static_cast<size_t>(i)]});
    }
  }
  return set;
}

}  // namespace clouddelta
