#pragma once

// Test-side utilities and independent reference implementations. Oracles
// here deliberately avoid the code paths they check: composition uses
// dense 4x4 matrices, eigenpairs come from a hand-rolled Jacobi sweep,
// and nearest neighbors from exhaustive scans.

#include "sloam/core.hpp"
#include "sloam/matching.hpp"
#include "sloam/scan.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

using sloam::Mat3;
using sloam::Quat;
using sloam::RigidTransform;
using sloam::Vec3;

class TestRng {
 public:
  explicit TestRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  Vec3 vec3(double lo, double hi) {
    return Vec3(uniform(lo, hi), uniform(lo, hi), uniform(lo, hi));
  }

  Vec3 unit_vector() {
    while (true) {
      const Vec3 v = vec3(-1.0, 1.0);
      const double n = v.norm();
      if (n > 1e-3 && n <= 1.0) return v / n;
    }
  }

  Quat quat(double max_angle) {
    const double angle = uniform(-max_angle, max_angle);
    return Quat(Eigen::AngleAxisd(angle, unit_vector()));
  }

  RigidTransform transform(double max_translation, double max_angle) {
    RigidTransform T;
    T.q = quat(max_angle);
    T.t = vec3(-max_translation, max_translation);
    return T;
  }

 private:
  std::uint64_t state_ = 0;
};

// ---------------------------------------------------------------------------
// Homogeneous-matrix oracle for rigid-transform algebra.

inline Eigen::Matrix4d homogeneous(const RigidTransform& T) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = T.q.toRotationMatrix();
  m.topRightCorner<3, 1>() = T.t;
  return m;
}

inline Vec3 apply_homogeneous(const Eigen::Matrix4d& m, const Vec3& p) {
  const Eigen::Vector4d h = m * Eigen::Vector4d(p.x(), p.y(), p.z(), 1.0);
  return h.head<3>();
}

// ---------------------------------------------------------------------------
// Cyclic Jacobi eigensolver for symmetric 3x3 matrices; eigenvalues
// returned in ascending order with matching eigenvector columns.

inline void jacobi_eigen3(Mat3 a, Vec3& eigenvalues, Mat3& eigenvectors) {
  Mat3 v = Mat3::Identity();
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::sqrt(a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) +
                                 a(1, 2) * a(1, 2));
    if (off < 1e-15 * scale) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = 0.5 * std::atan2(2.0 * a(p, q), a(p, p) - a(q, q));
        const double c = std::cos(theta), s = std::sin(theta);
        Mat3 r = Mat3::Identity();
        r(p, p) = c;
        r(q, q) = c;
        r(p, q) = -s;
        r(q, p) = s;
        a = r.transpose() * a * r;
        v = v * r;
      }
    }
  }
  std::array<int, 3> order = {0, 1, 2};
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return a(i, i) < a(j, j); });
  for (int i = 0; i < 3; ++i) {
    eigenvalues[i] = a(order[i], order[i]);
    eigenvectors.col(i) = v.col(order[i]);
  }
}

// ---------------------------------------------------------------------------
// Exhaustive K-NN reference: (squared distance, index) ascending, ties by
// index, capped at max_dist.

inline std::vector<std::pair<double, int>> brute_force_knn(
    const std::vector<Vec3>& points, const Vec3& query, int k,
    double max_dist) {
  std::vector<std::pair<double, int>> all;
  const double cap = max_dist * max_dist;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const double d2 = (points[i] - query).squaredNorm();
    if (d2 <= cap) all.emplace_back(d2, i);
  }
  std::sort(all.begin(), all.end());
  if (static_cast<int>(all.size()) > k) all.resize(k);
  return all;
}

// ---------------------------------------------------------------------------
// Forward-generated registration problems: matches whose residual is
// exactly zero at T_star, with an optional fraction re-anchored to a
// parallel surface a fixed offset away (the cross-object pattern).

struct GeneratedMatches {
  std::vector<sloam::Match> matches;
  std::vector<bool> planted_outlier;
};

inline sloam::Match make_plane_match(const Vec3& normal, const Vec3& anchor,
                                     const Vec3& on_surface,
                                     const RigidTransform& T_star,
                                     sloam::ClassId cls = 70) {
  sloam::Match m;
  m.model.kind = sloam::SurfaceKind::Plane;
  m.model.direction = normal.normalized();
  m.model.anchor = anchor;
  m.source.point.position = T_star.inverse() * on_surface;
  m.source.point.class_id = cls;
  m.source.point.range = static_cast<float>(m.source.point.position.norm());
  m.source.surface_type = sloam::SurfaceType::Planar;
  m.neighbor_count = 5;
  return m;
}

inline sloam::Match make_line_match(const Vec3& director, const Vec3& anchor,
                                    const Vec3& on_surface,
                                    const RigidTransform& T_star,
                                    sloam::ClassId cls = 80) {
  sloam::Match m;
  m.model.kind = sloam::SurfaceKind::Line;
  m.model.direction = director.normalized();
  m.model.anchor = anchor;
  m.source.point.position = T_star.inverse() * on_surface;
  m.source.point.class_id = cls;
  m.source.point.range = static_cast<float>(m.source.point.position.norm());
  m.source.surface_type = sloam::SurfaceType::Edge;
  m.neighbor_count = 4;
  return m;
}

/// Matches exactly satisfied at T_star. A planted fraction is re-anchored
/// off-surface: plane anchors shift along the normal, line anchors across
/// the director, by `displacement` meters, keeping residual zero nowhere.
inline GeneratedMatches generate_matches(const RigidTransform& T_star,
                                         int n_plane, int n_line, TestRng& rng,
                                         double outlier_fraction = 0.0,
                                         double displacement = 2.0,
                                         double noise = 0.0) {
  GeneratedMatches out;
  for (int i = 0; i < n_plane + n_line; ++i) {
    const bool is_line = i >= n_plane;
    const Vec3 dir = rng.unit_vector();
    const Vec3 anchor = rng.vec3(-10.0, 10.0);
    Vec3 on_surface;
    if (is_line) {
      on_surface = anchor + dir * rng.uniform(-3.0, 3.0);
    } else {
      const Vec3 t1 = dir.unitOrthogonal();
      const Vec3 t2 = dir.cross(t1);
      on_surface =
          anchor + t1 * rng.uniform(-3.0, 3.0) + t2 * rng.uniform(-3.0, 3.0);
    }
    if (noise > 0.0) {
      on_surface += rng.vec3(-noise, noise);
    }
    sloam::Match m = is_line ? make_line_match(dir, anchor, on_surface, T_star)
                             : make_plane_match(dir, anchor, on_surface, T_star);

    const bool plant = rng.uniform() < outlier_fraction;
    if (plant) {
      const Vec3 off_normal =
          is_line ? Vec3(dir.unitOrthogonal()) : dir;
      m.model.anchor += off_normal * displacement;
    }
    out.matches.push_back(m);
    out.planted_outlier.push_back(plant);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scan construction and manipulation.

/// Rigidly moves a scan into another sensor frame, keeping labels and ring
/// indices and recomputing ranges.
inline sloam::LabeledScan transform_scan(const sloam::LabeledScan& scan,
                                         const RigidTransform& T) {
  sloam::LabeledScan out = scan;
  for (auto& p : out.points) {
    p.position = T * p.position;
    p.range = static_cast<float>(p.position.norm());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Small file and format helpers.

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Minimal well-formedness check: every element tag closes in order.
/// Handles comments, declarations and self-closing tags; ignores CDATA.
inline bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '<') {
      ++i;
      continue;
    }
    if (text.compare(i, 4, "<!--") == 0) {
      const std::size_t end = text.find("-->", i);
      if (end == std::string::npos) return false;
      i = end + 3;
      continue;
    }
    if (text.compare(i, 2, "<?") == 0 || text.compare(i, 2, "<!") == 0) {
      const std::size_t end = text.find('>', i);
      if (end == std::string::npos) return false;
      i = end + 1;
      continue;
    }
    // Find the matching '>' outside quoted attribute values.
    std::size_t end = i + 1;
    char quote = 0;
    while (end < text.size()) {
      const char c = text[end];
      if (quote != 0) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = static_cast<char>(c);
      } else if (c == '>') {
        break;
      }
      ++end;
    }
    if (end >= text.size()) return false;

    const bool closing = text[i + 1] == '/';
    const bool self_closing = text[end - 1] == '/';
    std::size_t name_begin = i + (closing ? 2 : 1);
    std::size_t name_end = name_begin;
    while (name_end < end && !std::isspace(static_cast<unsigned char>(
                                 text[name_end])) &&
           text[name_end] != '/' && text[name_end] != '>') {
      ++name_end;
    }
    const std::string name = text.substr(name_begin, name_end - name_begin);
    if (name.empty()) return false;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
    i = end + 1;
  }
  return stack.empty();
}

}  // namespace testutil
