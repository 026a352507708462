#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "clouddelta/errors.hpp"

namespace clouddelta {

// Exact nearest-neighbour tree over fixed-dimension points.
//
// Determinism contract: among equidistant records the one with the lowest
// input index wins, so queries give the same answer as a first-wins linear
// scan regardless of tree layout.
template <int Dim>
class KdTree {
 public:
  using Vector = Eigen::Matrix<double, Dim, 1>;

  struct Hit {
    int index = -1;
    double distance = std::numeric_limits<double>::infinity();
  };

  explicit KdTree(std::vector<Vector> points) : points_(std::move(points)) {
    if (points_.empty()) throw Error("kd-tree built over an empty point set");
    order_.resize(points_.size());
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<int>(i);
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(points_.size()));
  }

  int size() const { return static_cast<int>(points_.size()); }

  Hit nearest(const Vector& query) const {
    Best best;
    search(root_, query, best);
    return {best.index, std::sqrt(best.dist2)};
  }

  // k nearest records, ordered by (distance, input index).
  std::vector<Hit> knn(const Vector& query, int k) const {
    KnnHeap heap(std::min<int>(k, size()));
    search_knn(root_, query, heap);
    std::vector<std::pair<double, int>> entries = heap.sorted();
    std::vector<Hit> hits;
    hits.reserve(entries.size());
    for (const auto& [d2, idx] : entries) hits.push_back({idx, std::sqrt(d2)});
    return hits;
  }

 private:
  static constexpr int kLeafSize = 16;

  struct Node {
    int axis = -1;        // -1 marks a leaf
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // order_ range, leaves only
  };

  struct Best {
    double dist2 = std::numeric_limits<double>::infinity();
    int index = std::numeric_limits<int>::max();

    bool improves(double d2, int idx) const {
      return d2 < dist2 || (d2 == dist2 && idx < index);
    }
  };

  // Bounded max-heap of (dist2, index) pairs under lexicographic order.
  class KnnHeap {
   public:
    explicit KnnHeap(int capacity) : capacity_(capacity) {}

    bool full() const { return static_cast<int>(entries_.size()) == capacity_; }

    double worst_dist2() const { return entries_.front().first; }

    // Lexicographic bound: a candidate (d2, idx) displaces the current worst
    // only if it compares strictly lower.
    bool admits(double d2, int idx) const {
      if (!full()) return true;
      return std::make_pair(d2, idx) < entries_.front();
    }

    void push(double d2, int idx) {
      if (!admits(d2, idx)) return;
      if (full()) {
        std::pop_heap(entries_.begin(), entries_.end());
        entries_.back() = {d2, idx};
      } else {
        entries_.push_back({d2, idx});
      }
      std::push_heap(entries_.begin(), entries_.end());
    }

    std::vector<std::pair<double, int>> sorted() {
      std::sort_heap(entries_.begin(), entries_.end());
      return std::move(entries_);
    }

   private:
    int capacity_;
    std::vector<std::pair<double, int>> entries_;
  };

  int build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
      node.begin = begin;
      node.end = end;
      // Leaves scan in index order so the lowest index wins ties naturally.
      std::sort(order_.begin() + begin, order_.begin() + end);
      nodes_.push_back(node);
      return static_cast<int>(nodes_.size()) - 1;
    }

    node.axis = widest_axis(begin, end);
    int mid = begin + (end - begin) / 2;
    int axis = node.axis;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       double va = points_[static_cast<size_t>(a)][axis];
                       double vb = points_[static_cast<size_t>(b)][axis];
                       return va < vb || (va == vb && a < b);
                     });
    node.split = points_[static_cast<size_t>(order_[static_cast<size_t>(mid)])][axis];

    int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    int left = build(begin, mid);
    int right = build(mid, end);
    nodes_[static_cast<size_t>(self)].left = left;
    nodes_[static_cast<size_t>(self)].right = right;
    return self;
  }

  int widest_axis(int begin, int end) const {
    Vector lo = points_[static_cast<size_t>(order_[static_cast<size_t>(begin)])];
    Vector hi = lo;
    for (int i = begin + 1; i < end; ++i) {
      const Vector& p = points_[static_cast<size_t>(order_[static_cast<size_t>(i)])];
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    return axis;
  }

  void search(int node_id, const Vector& query, Best& best) const {
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int idx = order_[static_cast<size_t>(i)];
        double d2 = (points_[static_cast<size_t>(idx)] - query).squaredNorm();
        if (best.improves(d2, idx)) best = {d2, idx};
      }
      return;
    }
    double diff = query[node.axis] - node.split;
    int near = diff < 0 ? node.left : node.right;
    int far = diff < 0 ? node.right : node.left;
    search(near, query, best);
    // Equality included: an equidistant record across the plane may carry a
    // lower index than the current best.
    if (diff * diff <= best.dist2) search(far, query, best);
  }

  void search_knn(int node_id, const Vector& query, KnnHeap& heap) const {
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    if (node.axis < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        int idx = order_[static_cast<size_t>(i)];
        heap.push((points_[static_cast<size_t>(idx)] - query).squaredNorm(), idx);
      }
      return;
    }
    double diff = query[node.axis] - node.split;
    int near = diff < 0 ? node.left : node.right;
    int far = diff < 0 ? node.right : node.left;
    search_knn(near, query, heap);
    if (!heap.full() || diff * diff <= heap.worst_dist2()) {
      search_knn(far, query, heap);
    }
  }

  std::vector<Vector> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = 0;
};

}  // namespace clouddelta
