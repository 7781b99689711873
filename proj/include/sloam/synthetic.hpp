#pragma once

#include "sloam/core.hpp"
#include "sloam/scan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace sloam {

/// Deterministic 64-bit mix, used for reproducible synthetic noise.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
  return static_cast<double>(h >> 11) * 0x1.0p-53;  // [0, 1)
}

struct SyntheticSensor {
  int rings = 16;
  double elevation_min_deg = -15.0;
  double elevation_max_deg = 15.0;
  int azimuth_steps = 600;
  double min_range = 2.0;
  double max_range = 120.0;
};

struct SyntheticSceneConfig {
  int n_frames = 200;
  double base_speed = 0.25;      // meters per frame along the corridor
  double speed_wobble = 0.6;     // fractional sinusoidal speed variation
  double noise_sigma = 0.005;    // radial noise half-width, meters
  double outlier_fraction = 0.0; // points displaced far off their surface
  std::uint64_t seed = 20240915;
  bool with_dynamic_object = true;
  SyntheticSensor sensor;
};

namespace detail {

struct ScenePrimitive {
  enum class Shape { GroundPlane, Box, Cylinder } shape;
  ClassId class_id = 0;
  // GroundPlane: z = height.
  double height = 0.0;
  // Box: axis-aligned [lo, hi].
  Vec3 lo = Vec3::Zero(), hi = Vec3::Zero();
  // Cylinder: vertical, center (cx, cy), radius, z in [z_lo, z_hi].
  double cx = 0.0, cy = 0.0, radius = 0.0, z_lo = 0.0, z_hi = 0.0;
  // World-frame velocity per frame; zero for static structure.
  Vec3 velocity = Vec3::Zero();

  static ScenePrimitive ground(double z, ClassId cls) {
    ScenePrimitive p;
    p.shape = Shape::GroundPlane;
    p.height = z;
    p.class_id = cls;
    return p;
  }
  static ScenePrimitive box(const Vec3& lo, const Vec3& hi, ClassId cls) {
    ScenePrimitive p;
    p.shape = Shape::Box;
    p.lo = lo;
    p.hi = hi;
    p.class_id = cls;
    return p;
  }
  static ScenePrimitive cylinder(double cx, double cy, double r, double z_lo,
                                 double z_hi, ClassId cls) {
    ScenePrimitive p;
    p.shape = Shape::Cylinder;
    p.cx = cx;
    p.cy = cy;
    p.radius = r;
    p.z_lo = z_lo;
    p.z_hi = z_hi;
    p.class_id = cls;
    return p;
  }

  /// Ray-primitive intersection; returns the hit parameter (range along a
  /// unit direction) or a negative value on miss. The shift argument moves
  /// the primitive by its per-frame velocity.
  double raycast(const Vec3& origin, const Vec3& dir, const Vec3& shift) const {
    constexpr double kEps = 1e-9;
    switch (shape) {
      case Shape::GroundPlane: {
        if (std::abs(dir.z()) < kEps) return -1.0;
        const double t = (height + shift.z() - origin.z()) / dir.z();
        return t > kEps ? t : -1.0;
      }
      case Shape::Box: {
        double t0 = kEps, t1 = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
          const double lo_a = lo[a] + shift[a], hi_a = hi[a] + shift[a];
          if (std::abs(dir[a]) < kEps) {
            if (origin[a] < lo_a || origin[a] > hi_a) return -1.0;
            continue;
          }
          double ta = (lo_a - origin[a]) / dir[a];
          double tb = (hi_a - origin[a]) / dir[a];
          if (ta > tb) std::swap(ta, tb);
          t0 = std::max(t0, ta);
          t1 = std::min(t1, tb);
          if (t0 > t1) return -1.0;
        }
        return t0;
      }
      case Shape::Cylinder: {
        const double ox = origin.x() - (cx + shift.x());
        const double oy = origin.y() - (cy + shift.y());
        const double a = dir.x() * dir.x() + dir.y() * dir.y();
        if (a < kEps) return -1.0;
        const double b = 2.0 * (ox * dir.x() + oy * dir.y());
        const double c = ox * ox + oy * oy - radius * radius;
        const double disc = b * b - 4.0 * a * c;
        if (disc < 0.0) return -1.0;
        const double t = (-b - std::sqrt(disc)) / (2.0 * a);
        if (t < kEps) return -1.0;
        const double z = origin.z() + t * dir.z();
        if (z < z_lo + shift.z() || z > z_hi + shift.z()) return -1.0;
        return t;
      }
    }
    return -1.0;
  }

  double center_x() const {
    switch (shape) {
      case Shape::GroundPlane: return 0.0;
      case Shape::Box: return 0.5 * (lo.x() + hi.x());
      case Shape::Cylinder: return cx;
    }
    return 0.0;
  }
};

}  // namespace detail

/// Procedural corridor world observed by a spinning multi-ring sensor.
/// The layout repeats roadside structure (walls with jogs, hedge pairs,
/// pole/trunk pairs) at a pitch comparable to the travel per frame at high
/// skip counts, so nearest-neighbor matching becomes genuinely ambiguous
/// and both the class gating and the rejection loop have work to do.
class SyntheticScene {
 public:
  explicit SyntheticScene(const SyntheticSceneConfig& cfg = {}) : cfg_(cfg) {
    build_world();
    build_trajectory();
  }

  const SyntheticSceneConfig& config() const { return cfg_; }
  int frame_count() const { return cfg_.n_frames; }

  const std::vector<RigidTransform>& poses() const { return poses_; }
  RigidTransform pose(int frame) const { return poses_.at(frame); }

  /// Renders one frame in the sensor frame. Rays that hit nothing inside
  /// the sensor range produce no point.
  LabeledScan scan(int frame) const {
    const RigidTransform& T = poses_.at(frame);
    LabeledScan out;
    out.timestamp_index = static_cast<std::size_t>(frame);
    out.points.reserve(static_cast<std::size_t>(cfg_.sensor.rings) *
                       cfg_.sensor.azimuth_steps / 4);

    // Primitives that cannot be inside sensor range are skipped whole.
    std::vector<const detail::ScenePrimitive*> active;
    active.reserve(world_.size());
    for (const auto& prim : world_) {
      const Vec3 shift = prim.velocity * static_cast<double>(frame);
      if (prim.shape != detail::ScenePrimitive::Shape::GroundPlane &&
          std::abs(prim.center_x() + shift.x() - T.t.x()) >
              cfg_.sensor.max_range + 40.0)
        continue;
      active.push_back(&prim);
    }

    const double elev_step =
        cfg_.sensor.rings > 1
            ? (cfg_.sensor.elevation_max_deg - cfg_.sensor.elevation_min_deg) /
                  (cfg_.sensor.rings - 1)
            : 0.0;
    for (int ring = 0; ring < cfg_.sensor.rings; ++ring) {
      const double elev =
          (cfg_.sensor.elevation_min_deg + ring * elev_step) * M_PI / 180.0;
      const double cos_e = std::cos(elev), sin_e = std::sin(elev);
      for (int step = 0; step < cfg_.sensor.azimuth_steps; ++step) {
        const double az = 2.0 * M_PI * step / cfg_.sensor.azimuth_steps;
        const Vec3 dir_sensor(cos_e * std::cos(az), cos_e * std::sin(az), sin_e);
        const Vec3 dir_world = T.q * dir_sensor;

        double best = std::numeric_limits<double>::infinity();
        const detail::ScenePrimitive* hit = nullptr;
        for (const auto* prim : active) {
          const Vec3 shift = prim->velocity * static_cast<double>(frame);
          const double t = prim->raycast(T.t, dir_world, shift);
          if (t > 0.0 && t < best) {
            best = t;
            hit = prim;
          }
        }
        if (hit == nullptr) continue;

        double range = best;
        const std::uint64_t ray_id =
            static_cast<std::uint64_t>(ring) * 100000u +
            static_cast<std::uint64_t>(step);
        if (cfg_.noise_sigma > 0.0) {
          range += cfg_.noise_sigma *
                   (2.0 * hash_unit(cfg_.seed, static_cast<std::uint64_t>(frame),
                                    ray_id) -
                    1.0);
        }
        if (cfg_.outlier_fraction > 0.0 &&
            hash_unit(cfg_.seed ^ 0xA5A5A5A5ull,
                      static_cast<std::uint64_t>(frame),
                      ray_id) < cfg_.outlier_fraction) {
          // Bad return: keeps its label, lands far off the true surface.
          range += 0.5 + 2.0 * hash_unit(cfg_.seed ^ 0x5A5A5A5Aull,
                                         static_cast<std::uint64_t>(frame),
                                         ray_id);
        }
        if (range < cfg_.sensor.min_range || range > cfg_.sensor.max_range)
          continue;

        LabeledPoint pt;
        pt.position = dir_sensor * range;
        pt.range = static_cast<float>(range);
        pt.ring = static_cast<std::int16_t>(ring);
        pt.class_id = hit->class_id;
        out.points.push_back(pt);
      }
    }
    return out;
  }

  std::vector<LabeledScan> all_scans() const {
    std::vector<LabeledScan> scans;
    scans.reserve(static_cast<std::size_t>(cfg_.n_frames));
    for (int i = 0; i < cfg_.n_frames; ++i) scans.push_back(scan(i));
    return scans;
  }

 private:
  using P = detail::ScenePrimitive;

  void build_world() {
    constexpr double kGround = -1.7;
    world_.push_back(P::ground(kGround, 40));  // road

    // Buildings: wall slabs along both sides with a perpendicular jog at
    // the end of each slab so forward translation stays observable.
    for (double x0 = -60.0; x0 < 200.0; x0 += 20.0) {
      for (double side : {-1.0, 1.0}) {
        const double y0 = side * 12.0, y1 = side * 12.5;
        world_.push_back(P::box(Vec3(x0, std::min(y0, y1), kGround),
                                Vec3(x0 + 17.0, std::max(y0, y1), 3.0), 50));
        const double jy0 = side * 9.5, jy1 = side * 12.5;
        world_.push_back(P::box(Vec3(x0 + 17.0, std::min(jy0, jy1), kGround),
                                Vec3(x0 + 17.5, std::max(jy0, jy1), 3.0), 50));
      }
    }

    // Hedge pairs: same class two meters apart, the aliasing bait that only
    // hurts once the warm start is off by a meter or more.
    for (double x0 = -60.0; x0 < 200.0; x0 += 10.0) {
      for (double side : {-1.0, 1.0}) {
        const double y = side * 6.2;
        world_.push_back(P::box(Vec3(x0 + 3.0, y - 0.3, kGround),
                                Vec3(x0 + 3.8, y + 0.3, -0.4), 70));
        world_.push_back(P::box(Vec3(x0 + 5.8, y - 0.3, kGround),
                                Vec3(x0 + 6.6, y + 0.3, -0.4), 70));
      }
    }

    // Scattered bushes: small vegetation boxes at irregular meter-scale
    // spacings. Their corners look alike, so once the warm start is off by
    // a fraction of the spacing the matches land on the wrong bush and only
    // motion-consistency checks can tell. Kept knee-high so the trunk and
    // pole rows behind them stay visible.
    for (int k = 0; (-60.0 + 3.0 * k) < 200.0; ++k) {
      for (double side : {-1.0, 1.0}) {
        const std::uint64_t key = static_cast<std::uint64_t>(2 * k) +
                                  (side > 0.0 ? 1u : 0u);
        const double jx = 2.2 * hash_unit(cfg_.seed ^ 0xB00Bull, key, 0);
        const double w = 0.3 + 0.5 * hash_unit(cfg_.seed ^ 0xB00Bull, key, 1);
        const double h = 0.4 + 0.3 * hash_unit(cfg_.seed ^ 0xB00Bull, key, 2);
        const double x0 = -60.0 + 3.0 * k + jx;
        const double y = side * (4.6 + 0.6 * hash_unit(cfg_.seed ^ 0xB00Bull, key, 3));
        world_.push_back(P::box(Vec3(x0, y - 0.5 * w, kGround),
                                Vec3(x0 + w, y + 0.5 * w, kGround + h), 70));
      }
    }

    // Trunk/pole pairs: different classes half a meter apart, close enough
    // that class-blind neighbor sets mix the two objects and corrupt line
    // fits, while class gating keeps them separate.
    for (double x0 = -60.0; x0 < 200.0; x0 += 10.0) {
      for (double side : {-1.0, 1.0}) {
        const double y = side * 8.5;
        world_.push_back(P::cylinder(x0 + 1.0, y, 0.30, kGround, 1.2, 71));
        world_.push_back(P::cylinder(x0 + 1.45, y, 0.15, kGround, 3.2, 80));
      }
    }

    if (cfg_.with_dynamic_object) {
      // Oncoming convoy, class 10; never to be matched or mapped. Spaced so
      // one car is near the sensor for most of the drive.
      for (double x0 = 30.0; x0 < 240.0; x0 += 25.0) {
        P car = P::box(Vec3(x0, 1.1, kGround), Vec3(x0 + 4.2, 2.9, -0.2), 10);
        car.velocity = Vec3(-0.6, 0.0, 0.0);
        world_.push_back(car);
      }
    }
  }

  void build_trajectory() {
    poses_.reserve(static_cast<std::size_t>(cfg_.n_frames));
    double x = 0.0;
    for (int i = 0; i < cfg_.n_frames; ++i) {
      const double yaw = 0.05 * std::sin(2.0 * M_PI * i / 90.0);
      const double y = 0.4 * std::sin(2.0 * M_PI * i / 120.0);
      RigidTransform T;
      T.q = Quat(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
      T.t = Vec3(x, y, 0.0);
      poses_.push_back(T);
      const double speed =
          cfg_.base_speed *
          (1.0 + cfg_.speed_wobble * std::sin(2.0 * M_PI * i / 40.0));
      x += speed;
    }
  }

  SyntheticSceneConfig cfg_;
  std::vector<detail::ScenePrimitive> world_;
  std::vector<RigidTransform> poses_;
};

}  // namespace sloam
