#pragma once

#include <Eigen/Core>
#include <memory>
#include <vector>

#include "clouddelta/core.hpp"
#include "clouddelta/types.hpp"

namespace clouddelta {

inline constexpr int kDescriptorDim = 64;

using Descriptor = Eigen::Matrix<double, kDescriptorDim, 1>;

// Ring-and-slab occupancy histogram around a pose. The submap is split into
// radial_bins concentric rings (by horizontal distance from the pose axis)
// crossed with height_bins horizontal slabs spanning pose z +- height_extent,
// counts L2-normalized. Depends only on horizontal distance and height, so
// rotating the scene about the pose's vertical axis leaves it unchanged.
struct DescriptorConfig {
  double radius = 4.5;       // submap sampling radius, metres
  int radial_bins = 8;
  int height_bins = 8;       // radial_bins * height_bins must equal 64
  double height_extent = 4.0;  // slabs cover [z - extent, z + extent]

  void validate() const;
};

struct DescriptorRecord {
  int k = 0;  // pose index the descriptor was computed at
  Descriptor q = Descriptor::Zero();
};

// Descriptors of one session, sorted by pose index. Poses whose submap was
// empty have no record.
struct DescriptorSet {
  std::vector<DescriptorRecord> records;

  int count() const { return static_cast<int>(records.size()); }

  // Record for pose k, or nullptr if that submap was empty.
  const DescriptorRecord* find(int k) const;
};

// Throws EmptyRegionError when the region has no points.
Descriptor compute_descriptor(const SphereRegion& region,
                              const DescriptorConfig& config);

DescriptorSet compute_descriptor_set(const PointCloud& map,
                                     const Trajectory& trajectory,
                                     const DescriptorConfig& config,
                                     int threads = 0);

// Seam for swapping the descriptor function without touching the pipeline.
class DescriptorProvider {
 public:
  virtual ~DescriptorProvider() = default;
  virtual DescriptorSet compute(const PointCloud& map,
                                const Trajectory& trajectory) const = 0;
};

class HistogramDescriptorProvider final : public DescriptorProvider {
 public:
  explicit HistogramDescriptorProvider(DescriptorConfig config, int threads = 0)
      : config_(config), threads_(threads) {
    config_.validate();
  }

  DescriptorSet compute(const PointCloud& map,
                        const Trajectory& trajectory) const override {
    return compute_descriptor_set(map, trajectory, config_, threads_);
  }

 private:
  DescriptorConfig config_;
  int threads_;
};

}  // namespace clouddelta
