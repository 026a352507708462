#include "clouddelta/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace clouddelta {

NNIndex::NNIndex(const DescriptorSet& set, int linear_threshold) {
  if (set.records.empty()) {
    throw EmptyDescriptorSetError("nearest-neighbour index needs at least one descriptor");
  }
  vectors_.reserve(set.records.size());
  keys_.reserve(set.records.size());
  for (const DescriptorRecord& r : set.records) {
    vectors_.push_back(r.q);
    keys_.push_back(r.k);
  }
  if (static_cast<int>(vectors_.size()) > linear_threshold) {
    tree_ = std::make_unique<KdTree<kDescriptorDim>>(vectors_);
  }
}

NNIndex::Hit NNIndex::nearest(const Descriptor& q) const {
  if (tree_) {
    auto hit = tree_->nearest(q);
    return {keys_[static_cast<size_t>(hit.index)], hit.distance};
  }
  int best = 0;
  double best_d2 = (vectors_[0] - q).squaredNorm();
  for (int i = 1; i < static_cast<int>(vectors_.size()); ++i) {
    double d2 = (vectors_[static_cast<size_t>(i)] - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {keys_[static_cast<size_t>(best)], std::sqrt(best_d2)};
}

std::vector<ChangeScore> score_changes(const NNIndex& index_t,
                                       const DescriptorSet& q_t1) {
  std::vector<ChangeScore> scores;
  scores.reserve(q_t1.records.size());
  for (const DescriptorRecord& r : q_t1.records) {
    NNIndex::Hit hit = index_t.nearest(r.q);
    scores.push_back({r.k, hit.k, hit.distance});
  }
  return scores;
}

namespace {

// Nearest pose of a trajectory to a point; ties go to the lowest index.
int nearest_pose(const Trajectory& tr, const Point3& p, double* dist_out) {
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= tr.count(); ++k) {
    double d2 = (tr.pose(k) - p).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = k;
    }
  }
  if (dist_out) *dist_out = std::sqrt(best_d2);
  return best;
}

}  // namespace

std::vector<RegionPair> select_regions(const std::vector<ChangeScore>& scores,
                                       const Trajectory& tr_t,
                                       const Trajectory& tr_t1,
                                       const SelectionOptions& options) {
  std::vector<RegionPair> selected;
  if (scores.empty() || tr_t.count() == 0) return selected;

  std::vector<ChangeScore> ranked = scores;
  std::sort(ranked.begin(), ranked.end(),
            [](const ChangeScore& a, const ChangeScore& b) {
              if (a.distance != b.distance) return a.distance > b.distance;
              return a.j < b.j;
            });

  double cutoff = -std::numeric_limits<double>::infinity();
  if (options.mode == SelectionMode::threshold) {
    double mean = 0.0;
    for (const ChangeScore& s : scores) mean += s.distance;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (const ChangeScore& s : scores) {
      double d = s.distance - mean;
      var += d * d;
    }
    var /= static_cast<double>(scores.size());
    double sigma = std::sqrt(var);
    // All distances equal means the sessions agree everywhere; nothing
    // stands out, so nothing is selected.
    if (sigma == 0.0) return selected;
    cutoff = mean + options.lambda_d * sigma;
  }

  double nms = options.effective_nms_radius();
  double pairing_max = options.effective_pairing_max();

  for (const ChangeScore& s : ranked) {
    if (options.mode == SelectionMode::threshold && s.distance < cutoff) break;
    if (options.mode == SelectionMode::top_k &&
        static_cast<int>(selected.size()) >= options.top_k) {
      break;
    }

    if (s.j < 1 || s.j > tr_t1.count()) {
      throw FormatError("change score references pose " + std::to_string(s.j) +
                        " outside the trajectory");
    }
    const Point3& center_t1 = tr_t1.pose(s.j);

    bool suppressed = false;
    for (const RegionPair& kept : selected) {
      if ((kept.center_t1 - center_t1).norm() < nms) {
        suppressed = true;
        break;
      }
    }
    if (suppressed) continue;

    double pairing_dist = 0.0;
    int i = nearest_pose(tr_t, center_t1, &pairing_dist);
    // No earlier pose near this spot: the sessions do not overlap here and
    // a comparison sphere on the earlier map would be meaningless.
    if (pairing_dist > pairing_max) continue;

    RegionPair pair;
    pair.center_t = tr_t.pose(i);
    pair.center_t1 = center_t1;
    pair.radius = options.radius;
    pair.score = s;
    selected.push_back(pair);
  }
  return selected;
}

}  // namespace clouddelta
