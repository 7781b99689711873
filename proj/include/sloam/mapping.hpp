#pragma once

#include "sloam/core.hpp"
#include "sloam/estimation.hpp"
#include "sloam/features.hpp"
#include "sloam/kitti.hpp"
#include "sloam/matching.hpp"
#include "sloam/scan.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace sloam {

struct VoxelKey {
  std::int32_t x = 0, y = 0, z = 0;
  bool operator==(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const {
    return static_cast<std::size_t>(k.x) * 73856093u ^
           static_cast<std::size_t>(k.y) * 19349669u ^
           static_cast<std::size_t>(k.z) * 83492791u;
  }
};

inline VoxelKey voxel_key(const Vec3& p, double side) {
  return VoxelKey{static_cast<std::int32_t>(std::floor(p.x() / side)),
                  static_cast<std::int32_t>(std::floor(p.y() / side)),
                  static_cast<std::int32_t>(std::floor(p.z() / side))};
}

/// Accumulator for one occupied voxel: running centroid plus the label of
/// the contributor that was observed closest to the sensor.
struct VoxelCell {
  Vec3 sum = Vec3::Zero();
  std::int64_t count = 0;
  ClassId label = 0;
  double min_range = std::numeric_limits<double>::infinity();

  Vec3 centroid() const { return sum / static_cast<double>(count); }

  void merge(const Vec3& position, ClassId class_id, double range) {
    sum += position;
    ++count;
    if (range < min_range) {
      min_range = range;
      label = class_id;
    }
  }
};

class VoxelGrid {
 public:
  explicit VoxelGrid(double side = 0.4) : side_(side) {}

  double side() const { return side_; }
  std::size_t size() const { return cells_.size(); }

  void insert(const Vec3& position, ClassId class_id, double range) {
    cells_[voxel_key(position, side_)].merge(position, class_id, range);
  }

  const std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash>& cells() const {
    return cells_;
  }

 private:
  double side_;
  std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash> cells_;
};

/// The custom semantic voxel filter: one point per occupied voxel, placed
/// at the member centroid, labeled and ranged after the member that was
/// closest to the sensor when observed.
inline std::vector<LabeledPoint> voxel_downsample_semantic(
    const std::vector<LabeledPoint>& points, double side) {
  VoxelGrid grid(side);
  for (const auto& p : points) grid.insert(p.position, p.class_id, p.range);
  std::vector<LabeledPoint> out;
  out.reserve(grid.size());
  for (const auto& [key, cell] : grid.cells()) {
    LabeledPoint p;
    p.position = cell.centroid();
    p.class_id = cell.label;
    p.range = static_cast<float>(cell.min_range);
    out.push_back(p);
  }
  return out;
}

struct MappingConfig {
  double edge_voxel = 0.4;
  double planar_voxel = 0.8;
  double raw_voxel = 0.4;
  double half_extent = 100.0;  // local map cube half-width, meters
};

struct LocalMap {
  std::vector<LabeledPoint> edge_points;
  std::vector<LabeledPoint> planar_points;

  bool empty() const { return edge_points.empty() && planar_points.empty(); }
};

/// Global map voxelized into three stores: edge and planar keypoint cells
/// used for scan-to-map matching, and a raw store kept for export. All
/// classes share the stores; each cell keeps the min-range label.
class SemanticVoxelMap {
 public:
  explicit SemanticVoxelMap(const MappingConfig& cfg = {})
      : cfg_(cfg),
        edge_store_(cfg.edge_voxel),
        planar_store_(cfg.planar_voxel),
        raw_store_(cfg.raw_voxel) {}

  const MappingConfig& config() const { return cfg_; }
  bool empty() const { return edge_store_.size() + planar_store_.size() == 0; }

  /// Merges one registered scan. Points are moved to the world frame with
  /// the final pose for the frame; their acquisition range rides along for
  /// the min-range label rule. Dynamic-class points never enter the map.
  void update(const KeypointSets& keypoints,
              const std::vector<LabeledPoint>& raw_points,
              const RigidTransform& T_pose, const SemanticTaxonomy& taxonomy) {
    auto insert = [&](VoxelGrid& store, const LabeledPoint& p) {
      if (taxonomy.is_dynamic(p.class_id)) return;
      store.insert(T_pose * p.position, p.class_id, p.range);
    };
    for (const auto& kp : keypoints.edge) insert(edge_store_, kp.point);
    for (const auto& kp : keypoints.planar) insert(planar_store_, kp.point);
    for (const auto& p : raw_points) insert(raw_store_, p);
  }

  /// Edge/planar cells whose centroid falls inside the axis-aligned cube
  /// of half-width half_extent around the pose translation.
  LocalMap extract_local(const RigidTransform& pose, double half_extent) const {
    LocalMap local;
    auto collect = [&](const VoxelGrid& store, std::vector<LabeledPoint>& out) {
      for (const auto& [key, cell] : store.cells()) {
        const Vec3 c = cell.centroid();
        if ((c - pose.t).cwiseAbs().maxCoeff() > half_extent) continue;
        LabeledPoint p;
        p.position = c;
        p.class_id = cell.label;
        p.range = static_cast<float>(cell.min_range);
        out.push_back(p);
      }
    };
    collect(edge_store_, local.edge_points);
    collect(planar_store_, local.planar_points);
    return local;
  }

  const VoxelGrid& edge_store() const { return edge_store_; }
  const VoxelGrid& planar_store() const { return planar_store_; }
  const VoxelGrid& raw_store() const { return raw_store_; }

  /// Raw-store contents as labeled points, for export.
  std::vector<LabeledPoint> export_points() const {
    std::vector<LabeledPoint> out;
    out.reserve(raw_store_.size());
    for (const auto& [key, cell] : raw_store_.cells()) {
      LabeledPoint p;
      p.position = cell.centroid();
      p.class_id = cell.label;
      p.range = static_cast<float>(cell.min_range);
      out.push_back(p);
    }
    return out;
  }

 private:
  MappingConfig cfg_;
  VoxelGrid edge_store_;
  VoxelGrid planar_store_;
  VoxelGrid raw_store_;
};

namespace detail {

/// Local map cells become the matching targets; cells from the edge store
/// act as edge keypoints, planar cells as planar keypoints. Cell order is
/// canonicalized so hash-map iteration order cannot leak into results.
inline KeypointSets local_map_keypoints(const LocalMap& local) {
  KeypointSets sets;
  auto fill = [](const std::vector<LabeledPoint>& pts, SurfaceType type,
                 std::vector<Keypoint>& out) {
    out.reserve(pts.size());
    for (const auto& p : pts) {
      Keypoint kp;
      kp.point = p;
      kp.surface_type = type;
      out.push_back(kp);
    }
    std::stable_sort(out.begin(), out.end(), [](const Keypoint& a, const Keypoint& b) {
      const Vec3& pa = a.point.position;
      const Vec3& pb = b.point.position;
      if (pa.x() != pb.x()) return pa.x() < pb.x();
      if (pa.y() != pb.y()) return pa.y() < pb.y();
      return pa.z() < pb.z();
    });
  };
  fill(local.edge_points, SurfaceType::Edge, sets.edge);
  fill(local.planar_points, SurfaceType::Planar, sets.planar);
  return sets;
}

}  // namespace detail

/// Refines a predicted world pose by registering the current scan's
/// keypoints against the local map, with the scan-to-map loss schedule.
inline RigidTransform scan_to_map_register(const KeypointSets& keypoints,
                                           const LocalMap& local_map,
                                           const RigidTransform& T_init,
                                           const OdometryConfig& cfg) {
  if (local_map.empty()) throw InsufficientMatches("empty local map");

  const KeypointSets targets = detail::local_map_keypoints(local_map);
  const SemanticNnForest forest =
      build_forest(targets, cfg.matching.use_semantics);

  OdometryConfig map_cfg = cfg;
  map_cfg.solver.use_orme = cfg.solver.use_orme && cfg.solver.orme_in_map;
  return register_keypoints(keypoints, forest, T_init,
                            cfg.solver.map_schedule,
                            cfg.solver.map_iters_max_outer, map_cfg)
      .T;
}

struct PipelineConfig {
  OdometryConfig odometry;
  MappingConfig mapping;
  IngestFilter ingest;  // applied by the caller at load time
  bool scan_to_map = true;
};

struct FrameResult {
  RigidTransform pose;            // world pose of this frame
  RigidTransform motion;          // scan-to-scan motion estimate
  bool odometry_failed = false;   // constant-velocity fallback used
  bool map_refine_failed = false; // odometry-predicted pose kept
  std::size_t match_count = 0;
  std::size_t inlier_count = 0;
};

/// Frame-by-frame driver: scan-to-scan odometry, scan-to-map refinement,
/// then map insertion. The world frame is the sensor frame of the first
/// scan processed.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& cfg,
                    SemanticTaxonomy taxonomy = SemanticTaxonomy::semantic_kitti())
      : cfg_(cfg), taxonomy_(std::move(taxonomy)), map_(cfg.mapping) {}

  const SemanticVoxelMap& map() const { return map_; }
  const std::vector<RigidTransform>& poses() const { return poses_; }
  const SemanticTaxonomy& taxonomy() const { return taxonomy_; }

  FrameResult process_frame(const LabeledScan& scan) {
    FrameResult result;
    KeypointSets keypoints =
        extract_keypoints(scan, cfg_.odometry.features, taxonomy_);

    if (poses_.empty()) {
      result.pose = RigidTransform::Identity();
      result.motion = RigidTransform::Identity();
    } else {
      try {
        const auto odo = register_keypoints(
            keypoints, prev_forest_, prev_motion_,
            cfg_.odometry.solver.odometry_schedule,
            cfg_.odometry.solver.iters_max_outer, cfg_.odometry);
        result.motion = odo.T;
        result.match_count = odo.match_count;
        result.inlier_count = odo.inlier_count;
      } catch (const RegistrationFailed&) {
        result.motion = prev_motion_;
        result.odometry_failed = true;
      }

      const RigidTransform predicted = poses_.back() * result.motion;
      result.pose = predicted;
      if (cfg_.scan_to_map) {
        try {
          const LocalMap local =
              map_.extract_local(predicted, cfg_.mapping.half_extent);
          result.pose =
              scan_to_map_register(keypoints, local, predicted, cfg_.odometry);
        } catch (const InsufficientMatches&) {
          result.map_refine_failed = true;
        } catch (const RegistrationFailed&) {
          result.map_refine_failed = true;
        }
      }
    }

    map_.update(keypoints, scan.points, result.pose, taxonomy_);
    poses_.push_back(result.pose);
    prev_motion_ = result.motion;
    prev_forest_ = build_forest(keypoints, cfg_.odometry.matching.use_semantics);
    return result;
  }

 private:
  PipelineConfig cfg_;
  SemanticTaxonomy taxonomy_;
  SemanticVoxelMap map_;
  std::vector<RigidTransform> poses_;
  RigidTransform prev_motion_;
  SemanticNnForest prev_forest_;
};

}  // namespace sloam
