#pragma once

#include <memory>
#include <vector>

#include "clouddelta/descriptor.hpp"
#include "clouddelta/kdtree.hpp"
#include "clouddelta/types.hpp"

namespace clouddelta {

// How far pose j of the later session is from anything seen in the earlier
// one: the distance from its descriptor to the nearest earlier descriptor,
// which sat at pose nn_i.
struct ChangeScore {
  int j = 0;      // pose index in the later session
  int nn_i = 0;   // pose index of the nearest earlier descriptor
  double distance = 0.0;
};

// A candidate changed region, one sphere centre per session.
// Invariant: |center_t - center_t1| <= the spatial pairing cap used at
// selection time, so both spheres cover the same physical spot.
struct RegionPair {
  Point3 center_t = Point3::Zero();
  Point3 center_t1 = Point3::Zero();
  double radius = 0.0;
  ChangeScore score;
};

// Exact nearest-neighbour index over one session's descriptors. Small sets
// are served by a linear scan, larger ones by a kd-tree; both return the
// same record (ties to the lowest pose index).
class NNIndex {
 public:
  static constexpr int kDefaultLinearThreshold = 512;

  explicit NNIndex(const DescriptorSet& set,
                   int linear_threshold = kDefaultLinearThreshold);

  struct Hit {
    int k = 0;  // pose index of the matched record
    double distance = 0.0;
  };

  Hit nearest(const Descriptor& q) const;

  int size() const { return static_cast<int>(keys_.size()); }
  bool uses_tree() const { return tree_ != nullptr; }

 private:
  std::vector<Descriptor> vectors_;
  std::vector<int> keys_;
  std::unique_ptr<KdTree<kDescriptorDim>> tree_;
};

inline NNIndex build_index(const DescriptorSet& set,
                           int linear_threshold = NNIndex::kDefaultLinearThreshold) {
  return NNIndex(set, linear_threshold);
}

// One score per record of the later session, in pose order.
std::vector<ChangeScore> score_changes(const NNIndex& index_t,
                                       const DescriptorSet& q_t1);

enum class SelectionMode { top_k, threshold };

struct SelectionOptions {
  SelectionMode mode = SelectionMode::threshold;
  int top_k = 3;
  double lambda_d = 2.0;          // threshold mode: keep distance >= mu + lambda*sigma
  double radius = 4.5;            // sampling radius stamped on the pairs
  double nms_radius = 0.0;        // 0 -> 2 * radius
  double spatial_pairing_max = 0.0;  // 0 -> 2 * radius

  double effective_nms_radius() const {
    return nms_radius > 0.0 ? nms_radius : 2.0 * radius;
  }
  double effective_pairing_max() const {
    return spatial_pairing_max > 0.0 ? spatial_pairing_max : 2.0 * radius;
  }
};

// Ranks scores by distance (descending, pose index breaking ties), walks the
// ranking with greedy suppression of centres within the NMS radius of an
// accepted one, and pairs each survivor with the nearest earlier-session
// pose. Candidates with no earlier pose within the pairing cap are dropped.
// In threshold mode selection stops once distance falls below
// mean + lambda_d * stddev; a zero stddev means nothing changed and yields
// an empty result.
std::vector<RegionPair> select_regions(const std::vector<ChangeScore>& scores,
                                       const Trajectory& tr_t,
                                       const Trajectory& tr_t1,
                                       const SelectionOptions& options);

}  // namespace clouddelta
