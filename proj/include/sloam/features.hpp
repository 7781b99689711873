#pragma once

#include "sloam/core.hpp"
#include "sloam/scan.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <vector>

namespace sloam {

struct FeatureConfig {
  int window = 5;                  // neighbors taken on each side
  int regions = 6;                 // azimuthal regions per ring
  int max_edge_per_region = 2;
  int max_planar_per_region = 4;
  double edge_threshold = 0.1;
  double planar_threshold = 0.05;
  int suppression = 5;             // neighbors masked around each pick
  double range_jump_fraction = 0.1;
  bool exclude_dynamic = true;
};

namespace detail {

struct RingPoint {
  LabeledPoint point;
  double azimuth = 0.0;
  double smoothness = 0.0;
  bool eligible = false;
};

/// Curvature score of LOAM lineage:
///   c_i = || sum_{j in window, j != i} (p_j - p_i) || / (|window| * ||p_i||)
/// Points without a full window on both sides stay ineligible.
inline void compute_ring_smoothness(std::vector<RingPoint>& ring, int window) {
  const int n = static_cast<int>(ring.size());
  for (int i = 0; i < n; ++i) {
    if (i < window || i >= n - window) continue;
    Vec3 sum = Vec3::Zero();
    for (int j = i - window; j <= i + window; ++j) {
      if (j == i) continue;
      sum += ring[j].point.position - ring[i].point.position;
    }
    const double norm = ring[i].point.position.norm();
    if (norm < 1e-9) continue;
    ring[i].smoothness = sum.norm() / (2.0 * window * norm);
    ring[i].eligible = true;
  }
}

/// Marks points next to big range discontinuities ineligible; edge picks
/// there would latch onto occlusion boundaries instead of real geometry.
inline void mark_range_jumps(std::vector<RingPoint>& ring, double fraction) {
  const int n = static_cast<int>(ring.size());
  for (int i = 0; i + 1 < n; ++i) {
    const double r0 = ring[i].point.range;
    const double r1 = ring[i + 1].point.range;
    if (std::abs(r1 - r0) > fraction * std::min(r0, r1)) {
      ring[i].eligible = false;
      ring[i + 1].eligible = false;
    }
  }
}

}  // namespace detail

/// Exposed for tests: per-point smoothness over one azimuth-ordered ring.
/// Returns (smoothness, eligible) pairs aligned with the input.
inline std::vector<std::pair<double, bool>> compute_smoothness(
    const std::vector<LabeledPoint>& ring_points, int window = 5) {
  std::vector<detail::RingPoint> ring(ring_points.size());
  for (std::size_t i = 0; i < ring_points.size(); ++i) {
    ring[i].point = ring_points[i];
  }
  detail::compute_ring_smoothness(ring, window);
  std::vector<std::pair<double, bool>> out;
  out.reserve(ring.size());
  for (const auto& rp : ring) out.emplace_back(rp.smoothness, rp.eligible);
  return out;
}

struct KeypointSets {
  std::vector<Keypoint> edge;
  std::vector<Keypoint> planar;
};

/// Extracts edge and planar keypoints from a scan, per ring and azimuthal
/// region, with non-maximum suppression along the ring. Dynamic-class
/// points are never selected when the taxonomy filter is on.
inline KeypointSets extract_keypoints(const LabeledScan& scan,
                                      const FeatureConfig& cfg,
                                      const SemanticTaxonomy& taxonomy) {
  // Group by ring, then order each ring by azimuth.
  std::map<int, std::vector<detail::RingPoint>> rings;
  for (const auto& p : scan.points) {
    if (p.ring < 0) continue;
    detail::RingPoint rp;
    rp.point = p;
    rp.azimuth = std::atan2(p.position.y(), p.position.x());
    rings[p.ring].push_back(rp);
  }

  KeypointSets out;
  for (auto& [ring_id, ring] : rings) {
    std::stable_sort(ring.begin(), ring.end(),
                     [](const detail::RingPoint& a, const detail::RingPoint& b) {
                       return a.azimuth < b.azimuth;
                     });
    detail::compute_ring_smoothness(ring, cfg.window);
    detail::mark_range_jumps(ring, cfg.range_jump_fraction);

    const int n = static_cast<int>(ring.size());
    std::vector<char> picked(ring.size(), 0);
    std::vector<char> blocked(ring.size(), 0);
    std::vector<int> order(ring.size());
    std::iota(order.begin(), order.end(), 0);

    auto selectable = [&](int i) {
      if (!ring[i].eligible || blocked[i] || picked[i]) return false;
      if (cfg.exclude_dynamic && taxonomy.is_dynamic(ring[i].point.class_id)) {
        return false;
      }
      return true;
    };
    auto suppress = [&](int i) {
      for (int j = std::max(0, i - cfg.suppression);
           j <= std::min(n - 1, i + cfg.suppression); ++j) {
        blocked[j] = 1;
      }
    };

    for (int region = 0; region < cfg.regions; ++region) {
      const int lo = static_cast<int>(static_cast<long long>(n) * region / cfg.regions);
      const int hi = static_cast<int>(static_cast<long long>(n) * (region + 1) / cfg.regions);
      if (hi - lo < 1) continue;

      std::vector<int> idx(order.begin() + lo, order.begin() + hi);
      std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return ring[a].smoothness > ring[b].smoothness;
      });

      int edges = 0;
      for (int i : idx) {
        if (edges >= cfg.max_edge_per_region) break;
        if (ring[i].smoothness < cfg.edge_threshold) break;
        if (!selectable(i)) continue;
        picked[i] = 1;
        suppress(i);
        Keypoint kp;
        kp.point = ring[i].point;
        kp.surface_type = SurfaceType::Edge;
        kp.smoothness = ring[i].smoothness;
        out.edge.push_back(kp);
        ++edges;
      }

      int planars = 0;
      for (auto it = idx.rbegin(); it != idx.rend(); ++it) {
        if (planars >= cfg.max_planar_per_region) break;
        const int i = *it;
        if (ring[i].smoothness > cfg.planar_threshold) break;
        if (!selectable(i)) continue;
        picked[i] = 1;
        suppress(i);
        Keypoint kp;
        kp.point = ring[i].point;
        kp.surface_type = SurfaceType::Planar;
        kp.smoothness = ring[i].smoothness;
        out.planar.push_back(kp);
        ++planars;
      }
    }
  }

  // Canonical order, independent of selection order.
  auto canon = [](std::vector<Keypoint>& v) {
    std::stable_sort(v.begin(), v.end(), [](const Keypoint& a, const Keypoint& b) {
      if (a.point.ring != b.point.ring) return a.point.ring < b.point.ring;
      const double aa = std::atan2(a.point.position.y(), a.point.position.x());
      const double ab = std::atan2(b.point.position.y(), b.point.position.x());
      return aa < ab;
    });
  };
  canon(out.edge);
  canon(out.planar);
  return out;
}

}  // namespace sloam
