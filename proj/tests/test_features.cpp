#include "sloam/features.hpp"

#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

using namespace sloam;

namespace {

LabeledPoint make_point(const Vec3& pos, ClassId cls, int ring) {
  LabeledPoint p;
  p.position = pos;
  p.range = static_cast<float>(pos.norm());
  p.class_id = cls;
  p.ring = static_cast<std::int16_t>(ring);
  return p;
}

/// One ring of `n` returns on a circle of radius `radius` at height `z`,
/// azimuths increasing strictly inside (-pi, pi) so the extractor's sort
/// preserves construction order.
std::vector<LabeledPoint> circle_ring(int n, double radius, double z,
                                      ClassId cls, int ring) {
  std::vector<LabeledPoint> pts;
  pts.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double theta = (k + 0.5) * 2.0 * M_PI / n - M_PI;
    pts.push_back(make_point(
        Vec3(radius * std::cos(theta), radius * std::sin(theta), z), cls,
        ring));
  }
  return pts;
}

}  // namespace

TEST_CASE("smoothness of collinear points is zero") {
  std::vector<LabeledPoint> ring;
  for (int i = 0; i <= 10; ++i) {
    ring.push_back(make_point(Vec3(10.0, (i - 5) * 0.1, 0.0), 40, 0));
  }
  const auto c = compute_smoothness(ring, 5);
  REQUIRE(c.size() == 11);
  for (int i = 0; i < 11; ++i) {
    CHECK(c[i].second == (i == 5));
  }
  CHECK(std::abs(c[5].first) < 1e-9);
}

TEST_CASE("smoothness peaks at a right-angle corner") {
  // Leg along y into the corner at (10, 0, 0), then leg along x.
  std::vector<LabeledPoint> ring;
  for (int i = 0; i <= 10; ++i) {
    ring.push_back(make_point(Vec3(10.0, (10 - i) * 0.1, 0.0), 40, 0));
  }
  for (int i = 11; i <= 20; ++i) {
    ring.push_back(make_point(Vec3(10.0 + (i - 10) * 0.1, 0.0, 0.0), 40, 0));
  }
  const auto c = compute_smoothness(ring, 5);
  REQUIRE(c.size() == 21);
  double best = -1.0;
  int best_i = -1;
  for (int i = 0; i < 21; ++i) {
    if (c[i].second && c[i].first > best) {
      best = c[i].first;
      best_i = i;
    }
  }
  CHECK(best_i == 10);
  CHECK(c[10].first > c[7].first);
  CHECK(c[7].first > c[5].first);
  CHECK(std::abs(c[5].first) < 1e-12);
}

TEST_CASE("rings shorter than the window stay ineligible") {
  std::vector<LabeledPoint> ring;
  for (int i = 0; i < 3; ++i) {
    ring.push_back(make_point(Vec3(5.0 + i, 1.0, 0.0), 40, 0));
  }
  const auto c = compute_smoothness(ring, 5);
  for (const auto& [value, eligible] : c) {
    CHECK(value == 0.0);
    CHECK_FALSE(eligible);
  }
}

TEST_CASE("flat ground yields planar keypoints and no edges") {
  LabeledScan scan;
  for (int r = 0; r < 4; ++r) {
    const auto ring = circle_ring(600, 5.0 + 3.0 * r, -1.7, 40, r);
    scan.points.insert(scan.points.end(), ring.begin(), ring.end());
  }
  const auto taxonomy = SemanticTaxonomy::semantic_kitti();
  const FeatureConfig cfg;
  const auto out = extract_keypoints(scan, cfg, taxonomy);

  CHECK(out.edge.empty());
  // At least one pick per (ring, region), at most the per-region cap.
  CHECK(out.planar.size() >= 4u * 6u);
  CHECK(out.planar.size() <=
        4u * 6u * static_cast<std::size_t>(cfg.max_planar_per_region));
  for (const auto& kp : out.planar) {
    CHECK(kp.surface_type == SurfaceType::Planar);
    CHECK(kp.point.class_id == 40);
    CHECK(kp.smoothness <= cfg.planar_threshold);
  }
}

namespace {

/// Ground ring with 9 consecutive returns replaced by a near pole.
LabeledScan pole_scan(ClassId pole_class) {
  LabeledScan scan;
  auto ring = circle_ring(600, 10.0, -1.7, 40, 0);
  for (int k = 300; k <= 308; ++k) {
    const double theta = (k + 0.5) * 2.0 * M_PI / 600 - M_PI;
    ring[k] = make_point(Vec3(4.0 * std::cos(theta), 4.0 * std::sin(theta), -1.7),
                         pole_class, 0);
  }
  scan.points = ring;
  return scan;
}

}  // namespace

TEST_CASE("a range step produces edge keypoints on the near object") {
  const auto scan = pole_scan(80);
  const auto taxonomy = SemanticTaxonomy::semantic_kitti();
  const auto out = extract_keypoints(scan, FeatureConfig{}, taxonomy);

  REQUIRE_FALSE(out.edge.empty());
  bool pole_edge = false;
  for (const auto& kp : out.edge) {
    CHECK(kp.smoothness >= FeatureConfig{}.edge_threshold);
    if (kp.point.class_id == 80) pole_edge = true;
  }
  CHECK(pole_edge);
}

TEST_CASE("edge and planar picks never share a point") {
  const auto scan = pole_scan(80);
  const auto out = extract_keypoints(scan, FeatureConfig{},
                                     SemanticTaxonomy::semantic_kitti());
  for (const auto& e : out.edge) {
    for (const auto& p : out.planar) {
      CHECK((e.point.position - p.point.position).norm() > 0.0);
    }
  }
}

TEST_CASE("dynamic classes are excluded from keypoints") {
  const auto taxonomy = SemanticTaxonomy::semantic_kitti();

  SECTION("fully dynamic scan yields nothing") {
    LabeledScan scan;
    scan.points = circle_ring(600, 10.0, -1.7, 10, 0);
    const auto out = extract_keypoints(scan, FeatureConfig{}, taxonomy);
    CHECK(out.edge.empty());
    CHECK(out.planar.empty());

    FeatureConfig keep;
    keep.exclude_dynamic = false;
    const auto kept = extract_keypoints(scan, keep, taxonomy);
    CHECK_FALSE(kept.planar.empty());
  }

  SECTION("dynamic object in a static scene leaves no dynamic picks") {
    const auto scan = pole_scan(10);  // the near object is a car
    const auto out = extract_keypoints(scan, FeatureConfig{}, taxonomy);
    for (const auto& kp : out.edge) CHECK_FALSE(taxonomy.is_dynamic(kp.point.class_id));
    for (const auto& kp : out.planar) CHECK_FALSE(taxonomy.is_dynamic(kp.point.class_id));
  }
}

TEST_CASE("keypoints on one ring are separated by the suppression radius") {
  const auto scan = pole_scan(80);
  const FeatureConfig cfg;
  const auto out = extract_keypoints(scan, cfg, SemanticTaxonomy::semantic_kitti());

  // Recover each keypoint's index in azimuth order (construction order here).
  auto index_of = [&](const Vec3& pos) {
    for (std::size_t i = 0; i < scan.points.size(); ++i) {
      if ((scan.points[i].position - pos).norm() == 0.0) return static_cast<int>(i);
    }
    return -1;
  };
  std::vector<int> indices;
  for (const auto& kp : out.edge) indices.push_back(index_of(kp.point.position));
  for (const auto& kp : out.planar) indices.push_back(index_of(kp.point.position));
  for (int i : indices) REQUIRE(i >= 0);
  std::sort(indices.begin(), indices.end());
  for (std::size_t i = 1; i < indices.size(); ++i) {
    CHECK(indices[i] - indices[i - 1] > cfg.suppression);
  }
}

TEST_CASE("points straddling a range discontinuity are never selected") {
  // Two half-rings at 10 m and 13 m: the step between indices 299 and 300
  // gives those two points the largest smoothness in the ring.
  LabeledScan scan;
  auto ring = circle_ring(600, 10.0, -1.7, 40, 0);
  for (int k = 300; k < 600; ++k) {
    const double theta = (k + 0.5) * 2.0 * M_PI / 600 - M_PI;
    ring[k] = make_point(
        Vec3(13.0 * std::cos(theta), 13.0 * std::sin(theta), -1.7), 40, 0);
  }
  scan.points = ring;
  const auto out = extract_keypoints(scan, FeatureConfig{},
                                     SemanticTaxonomy::semantic_kitti());
  for (const auto& kp : out.edge) {
    CHECK((kp.point.position - scan.points[299].position).norm() > 0.0);
    CHECK((kp.point.position - scan.points[300].position).norm() > 0.0);
  }
  for (const auto& kp : out.planar) {
    CHECK((kp.point.position - scan.points[299].position).norm() > 0.0);
    CHECK((kp.point.position - scan.points[300].position).norm() > 0.0);
  }
}

TEST_CASE("extraction is deterministic") {
  const auto scan = pole_scan(80);
  const auto taxonomy = SemanticTaxonomy::semantic_kitti();
  const auto a = extract_keypoints(scan, FeatureConfig{}, taxonomy);
  const auto b = extract_keypoints(scan, FeatureConfig{}, taxonomy);
  REQUIRE(a.edge.size() == b.edge.size());
  REQUIRE(a.planar.size() == b.planar.size());
  for (std::size_t i = 0; i < a.edge.size(); ++i) {
    CHECK((a.edge[i].point.position - b.edge[i].point.position).norm() == 0.0);
    CHECK(a.edge[i].smoothness == b.edge[i].smoothness);
  }
  for (std::size_t i = 0; i < a.planar.size(); ++i) {
    CHECK((a.planar[i].point.position - b.planar[i].point.position).norm() ==
          0.0);
    CHECK(a.planar[i].smoothness == b.planar[i].smoothness);
  }
}
