#pragma once

#include "sloam/core.hpp"
#include "sloam/features.hpp"
#include "sloam/kdtree.hpp"
#include "sloam/scan.hpp"

#include <Eigen/Eigenvalues>

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

namespace sloam {

struct MatchingConfig {
  int k_plane = 5;
  int k_line = 4;
  double base_max_dist = 3.0;   // meters, scaled by (skipped scans + 1)
  double planarity_ratio = 0.25;
  double linearity_ratio = 3.0;
  bool use_semantics = true;

  double max_dist(int n_skipped) const {
    return base_max_dist * (n_skipped + 1);
  }
};

enum class FitError { None, TooFewPoints, DegenerateFit };

namespace detail {

struct Pca {
  Vec3 centroid;
  Vec3 eigenvalues;   // ascending
  Mat3 eigenvectors;  // columns match eigenvalues
};

inline Pca pca(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) {
    const Vec3 d = p - c;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(pts.size());
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  return Pca{c, eig.eigenvalues(), eig.eigenvectors()};
}

}  // namespace detail

/// Plane through a neighbor set: anchor = centroid, direction = eigenvector
/// of the smallest eigenvalue. Rejected when the neighbors are not flat
/// enough (smallest eigenvalue too close to the middle one).
inline std::optional<SurfaceModel> fit_plane(const std::vector<Vec3>& neighbors,
                                             double planarity_ratio = 0.25,
                                             FitError* err = nullptr) {
  if (err) *err = FitError::None;
  if (neighbors.size() < 3) {
    if (err) *err = FitError::TooFewPoints;
    return std::nullopt;
  }
  const auto pca = detail::pca(neighbors);
  if (pca.eigenvalues[0] > planarity_ratio * pca.eigenvalues[1]) {
    if (err) *err = FitError::DegenerateFit;
    return std::nullopt;
  }
  SurfaceModel m;
  m.kind = SurfaceKind::Plane;
  m.anchor = pca.centroid;
  m.direction = pca.eigenvectors.col(0).normalized();
  return m;
}

/// Line through a neighbor set: anchor = centroid, direction = eigenvector
/// of the largest eigenvalue. Rejected when no direction dominates.
inline std::optional<SurfaceModel> fit_line(const std::vector<Vec3>& neighbors,
                                            double linearity_ratio = 3.0,
                                            FitError* err = nullptr) {
  if (err) *err = FitError::None;
  if (neighbors.size() < 2) {
    if (err) *err = FitError::TooFewPoints;
    return std::nullopt;
  }
  const auto pca = detail::pca(neighbors);
  if (pca.eigenvalues[2] < linearity_ratio * pca.eigenvalues[1]) {
    if (err) *err = FitError::DegenerateFit;
    return std::nullopt;
  }
  SurfaceModel m;
  m.kind = SurfaceKind::Line;
  m.anchor = pca.centroid;
  m.direction = pca.eigenvectors.col(2).normalized();
  return m;
}

/// One nearest-neighbor tree per (semantic class, surface type) pair.
/// With semantics off every class shares one tree per surface type.
class SemanticNnForest {
 public:
  using Key = std::pair<ClassId, SurfaceType>;

  SemanticNnForest() = default;

  SemanticNnForest(const std::vector<Keypoint>& edge,
                   const std::vector<Keypoint>& planar, bool use_semantics) {
    use_semantics_ = use_semantics;
    add(edge);
    add(planar);
    for (auto& [key, group] : groups_) {
      std::vector<Vec3> pts;
      pts.reserve(group.points.size());
      for (const auto& kp : group.points) pts.push_back(kp.point.position);
      group.tree = KdTree3(std::move(pts));
    }
  }

  std::size_t tree_count() const { return groups_.size(); }

  std::size_t total_points() const {
    std::size_t n = 0;
    for (const auto& [key, group] : groups_) n += group.points.size();
    return n;
  }

  /// Up to k nearest keypoints of the same class and surface type within
  /// max_dist of the (already transformed) query position.
  std::vector<const Keypoint*> semantic_nearest_neighbors(
      const Vec3& query, ClassId class_id, SurfaceType type, int k,
      double max_dist) const {
    std::vector<const Keypoint*> out;
    const auto it = groups_.find(key_for(class_id, type));
    if (it == groups_.end()) return out;
    const auto neighbors = it->second.tree.knn(query, k, max_dist);
    out.reserve(neighbors.size());
    for (const auto& n : neighbors) out.push_back(&it->second.points[n.index]);
    return out;
  }

 private:
  struct Group {
    std::vector<Keypoint> points;
    KdTree3 tree;
  };

  Key key_for(ClassId class_id, SurfaceType type) const {
    return {use_semantics_ ? class_id : ClassId{0}, type};
  }

  void add(const std::vector<Keypoint>& kps) {
    for (const auto& kp : kps) {
      groups_[key_for(kp.point.class_id, kp.surface_type)].points.push_back(kp);
    }
  }

  std::map<Key, Group> groups_;
  bool use_semantics_ = true;
};

inline SemanticNnForest build_forest(const KeypointSets& keypoints,
                                     bool use_semantics = true) {
  return SemanticNnForest(keypoints.edge, keypoints.planar, use_semantics);
}

/// A keypoint from the current scan paired with the surface fitted to its
/// neighbors in the target cloud. The source stays in the sensor frame of
/// the current scan; the model lives in the target frame.
struct Match {
  Keypoint source;
  SurfaceModel model;
  int neighbor_count = 0;
};

/// The match-assignment loop: transform each keypoint by T, query same
/// class and surface type neighbors, fit a plane or line, keep the pair.
/// Keypoints with too few neighbors or degenerate fits contribute nothing.
inline std::vector<Match> assign_matches(const KeypointSets& keypoints,
                                         const SemanticNnForest& forest,
                                         const RigidTransform& T,
                                         const MatchingConfig& cfg,
                                         int n_skipped = 0) {
  std::vector<Match> matches;
  const double max_dist = cfg.max_dist(n_skipped);
  std::vector<Vec3> positions;

  auto process = [&](const std::vector<Keypoint>& kps) {
    for (const auto& kp : kps) {
      const bool planar = kp.surface_type == SurfaceType::Planar;
      const int k = planar ? cfg.k_plane : cfg.k_line;
      const Vec3 transformed = T * kp.point.position;
      const auto neighbors = forest.semantic_nearest_neighbors(
          transformed, kp.point.class_id, kp.surface_type, k, max_dist);
      if (static_cast<int>(neighbors.size()) < k) continue;

      positions.clear();
      for (const auto* n : neighbors) positions.push_back(n->point.position);
      const auto model =
          planar ? fit_plane(positions, cfg.planarity_ratio)
                 : fit_line(positions, cfg.linearity_ratio);
      if (!model) continue;

      matches.push_back(Match{kp, *model, static_cast<int>(neighbors.size())});
    }
  };

  process(keypoints.planar);
  process(keypoints.edge);
  return matches;
}

}  // namespace sloam
