#pragma once

#include "sloam/core.hpp"

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace sloam {

using ClassId = std::uint16_t;

/// One LiDAR return with its semantic class, acquisition range and scan line.
struct LabeledPoint {
  Vec3 position = Vec3::Zero();  // sensor frame, meters
  ClassId class_id = 0;          // 0 = unlabeled
  float range = 0.0f;            // euclidean distance from the sensor
  std::int16_t ring = -1;        // scan-line index, -1 = unknown
};

/// One LiDAR sweep.
struct LabeledScan {
  std::vector<LabeledPoint> points;
  std::size_t timestamp_index = 0;

  bool empty() const { return points.empty(); }
  std::size_t size() const { return points.size(); }
};

struct ClassInfo {
  std::string name;
  std::array<std::uint8_t, 3> color = {0, 0, 0};  // rgb
};

/// The set of semantic classes, which of them are potentially moving, and
/// display colors. Defaults follow the SemanticKITTI raw label ids.
class SemanticTaxonomy {
 public:
  SemanticTaxonomy() = default;

  void add_class(ClassId id, std::string name, std::array<std::uint8_t, 3> rgb,
                 bool dynamic = false) {
    classes_[id] = ClassInfo{std::move(name), rgb};
    if (dynamic) dynamic_.insert(id);
  }

  bool is_known(ClassId id) const { return classes_.count(id) > 0; }
  bool is_dynamic(ClassId id) const { return dynamic_.count(id) > 0; }

  void set_dynamic(ClassId id, bool dynamic) {
    if (dynamic) {
      dynamic_.insert(id);
    } else {
      dynamic_.erase(id);
    }
  }

  std::array<std::uint8_t, 3> color(ClassId id) const {
    auto it = classes_.find(id);
    if (it == classes_.end()) return {128, 128, 128};
    return it->second.color;
  }

  std::string name(ClassId id) const {
    auto it = classes_.find(id);
    if (it == classes_.end()) return "unknown";
    return it->second.name;
  }

  const std::set<ClassId>& dynamic_classes() const { return dynamic_; }

  static SemanticTaxonomy semantic_kitti() {
    SemanticTaxonomy t;
    t.add_class(0, "unlabeled", {0, 0, 0});
    t.add_class(1, "outlier", {255, 0, 0});
    t.add_class(10, "car", {100, 150, 245}, true);
    t.add_class(11, "bicycle", {100, 230, 245}, true);
    t.add_class(13, "bus", {100, 80, 250});
    t.add_class(15, "motorcycle", {30, 60, 150}, true);
    t.add_class(16, "on-rails", {0, 0, 255});
    t.add_class(18, "truck", {80, 30, 180}, true);
    t.add_class(20, "other-vehicle", {0, 0, 255}, true);
    t.add_class(30, "person", {255, 30, 30}, true);
    t.add_class(31, "bicyclist", {255, 40, 200}, true);
    t.add_class(32, "motorcyclist", {150, 30, 90}, true);
    t.add_class(40, "road", {255, 0, 255});
    t.add_class(44, "parking", {255, 150, 255});
    t.add_class(48, "sidewalk", {75, 0, 75});
    t.add_class(49, "other-ground", {175, 0, 75});
    t.add_class(50, "building", {255, 200, 0});
    t.add_class(51, "fence", {255, 120, 50});
    t.add_class(52, "other-structure", {255, 150, 0});
    t.add_class(60, "lane-marking", {150, 255, 170});
    t.add_class(70, "vegetation", {0, 175, 0});
    t.add_class(71, "trunk", {135, 60, 0});
    t.add_class(72, "terrain", {150, 240, 80});
    t.add_class(80, "pole", {255, 240, 150});
    t.add_class(81, "traffic-sign", {255, 0, 0});
    t.add_class(99, "other-object", {50, 255, 255});
    t.add_class(252, "moving-car", {100, 150, 245}, true);
    t.add_class(253, "moving-bicyclist", {255, 40, 200}, true);
    t.add_class(254, "moving-person", {255, 30, 30}, true);
    t.add_class(255, "moving-motorcyclist", {150, 30, 90}, true);
    t.add_class(256, "moving-on-rails", {0, 0, 255}, true);
    t.add_class(257, "moving-bus", {100, 80, 250}, true);
    t.add_class(258, "moving-truck", {80, 30, 180}, true);
    t.add_class(259, "moving-other-vehicle", {0, 0, 255}, true);
    return t;
  }

 private:
  std::unordered_map<ClassId, ClassInfo> classes_;
  std::set<ClassId> dynamic_;
};

enum class SurfaceType { Edge, Planar };

/// A point selected for matching, with the curvature score that selected it.
struct Keypoint {
  LabeledPoint point;
  SurfaceType surface_type = SurfaceType::Planar;
  double smoothness = 0.0;
};

}  // namespace sloam
