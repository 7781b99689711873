#pragma once

#include "sloam/core.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

namespace sloam {

/// Exact k-nearest-neighbor search over a fixed set of 3D points.
/// Ties in distance are broken toward the smaller point index, so results
/// are exactly reproducible against a brute-force scan.
class KdTree3 {
 public:
  KdTree3() = default;

  explicit KdTree3(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) return;
    std::vector<std::int32_t> idx(points_.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::int32_t>(i);
    nodes_.reserve(points_.size());
    root_ = build(idx.data(), static_cast<std::int32_t>(idx.size()));
  }

  std::size_t size() const { return points_.size(); }
  const Vec3& point(std::size_t i) const { return points_[i]; }

  struct Neighbor {
    std::int32_t index;
    double dist_sq;
  };

  /// Up to k nearest points with distance <= max_dist, sorted by
  /// (distance, index).
  std::vector<Neighbor> knn(const Vec3& query, int k, double max_dist) const {
    std::vector<Neighbor> heap;  // max-heap on (dist_sq, index)
    if (root_ < 0 || k <= 0) return heap;
    heap.reserve(static_cast<std::size_t>(k));
    const double max_d2 = max_dist * max_dist;
    search(root_, query, k, max_d2, heap);
    std::sort(heap.begin(), heap.end(), [](const Neighbor& a, const Neighbor& b) {
      if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
      return a.index < b.index;
    });
    return heap;
  }

 private:
  struct Node {
    std::int32_t point = -1;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
  };

  static bool better(const Neighbor& a, const Neighbor& b) {
    // Strict (dist_sq, index) order. Used as the heap comparator, it keeps
    // the worst candidate at the front, which is the one to evict.
    if (a.dist_sq != b.dist_sq) return a.dist_sq < b.dist_sq;
    return a.index < b.index;
  }

  std::int32_t build(std::int32_t* idx, std::int32_t n) {
    if (n <= 0) return -1;

    // Split along the widest axis of this subset.
    Vec3 lo = points_[idx[0]], hi = points_[idx[0]];
    for (std::int32_t i = 1; i < n; ++i) {
      lo = lo.cwiseMin(points_[idx[i]]);
      hi = hi.cwiseMax(points_[idx[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const std::int32_t mid = n / 2;
    std::nth_element(idx, idx + mid, idx + n, [&](std::int32_t a, std::int32_t b) {
      const double ca = points_[a][axis], cb = points_[b][axis];
      if (ca != cb) return ca < cb;
      return a < b;
    });

    Node node;
    node.point = idx[mid];
    node.axis = static_cast<std::uint8_t>(axis);
    const std::int32_t self = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(node);
    const std::int32_t left = build(idx, mid);
    const std::int32_t right = build(idx + mid + 1, n - mid - 1);
    nodes_[self].left = left;
    nodes_[self].right = right;
    return self;
  }

  void search(std::int32_t node_id, const Vec3& query, int k, double max_d2,
              std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    const Vec3& p = points_[node.point];
    const double d2 = (query - p).squaredNorm();

    if (d2 <= max_d2) {
      const Neighbor cand{node.point, d2};
      if (static_cast<int>(heap.size()) < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), better);
      } else if (better(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), better);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), better);
      }
    }

    const double diff = query[node.axis] - p[node.axis];
    const std::int32_t near = diff <= 0 ? node.left : node.right;
    const std::int32_t far = diff <= 0 ? node.right : node.left;

    if (near >= 0) search(near, query, k, max_d2, heap);

    // Visit the far side unless the splitting plane is strictly farther
    // than the current worst candidate; equality must still be visited so
    // index tie-breaks stay exact.
    double bound = max_d2;
    if (static_cast<int>(heap.size()) == k) bound = std::min(bound, heap.front().dist_sq);
    if (far >= 0 && diff * diff <= bound) search(far, query, k, max_d2, heap);
  }

  std::vector<Vec3> points_;
  std::vector<Node> nodes_;
  std::int32_t root_ = -1;
};

}  // namespace sloam
