#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>

namespace sloam {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Rigid body transform as unit quaternion + translation.
/// Applying it maps a point p to q * p * q^-1 + t (active rotation,
/// Hamilton convention).
struct RigidTransform {
  Quat q = Quat::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform Identity() { return {}; }

  Vec3 apply(const Vec3& p) const { return q * p + t; }
  Vec3 operator*(const Vec3& p) const { return apply(p); }

  /// compose(a, b) * p == a * (b * p)
  RigidTransform operator*(const RigidTransform& other) const {
    RigidTransform out;
    out.q = (q * other.q).normalized();
    out.t = q * other.t + t;
    return out;
  }

  RigidTransform inverse() const {
    RigidTransform out;
    out.q = q.conjugate();
    out.t = -(out.q * t);
    return out;
  }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = q.toRotationMatrix();
    m.topRightCorner<3, 1>() = t;
    return m;
  }

  /// Rotation angle of q_a^-1 * q_b, in radians.
  double rotation_delta(const RigidTransform& other) const {
    Quat dq = q.conjugate() * other.q;
    return 2.0 * std::atan2(dq.vec().norm(), std::abs(dq.w()));
  }

  double translation_delta(const RigidTransform& other) const {
    return (t - other.t).norm();
  }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return a * b;
}

/// Quaternion exponential of a rotation vector (axis * angle).
inline Quat quat_exp(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (angle < 1e-12) {
    Quat q(1.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(), 0.5 * rotvec.z());
    q.normalize();
    return q;
  }
  const Vec3 axis = rotvec / angle;
  return Quat(Eigen::AngleAxisd(angle, axis));
}

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0, -v.z(), v.y(),
       v.z(), 0, -v.x(),
       -v.y(), v.x(), 0;
  return m;
}

enum class SurfaceKind { Plane, Line };

/// A local surface fitted to a neighborhood: a plane described by its unit
/// normal, or a line described by its unit director. `anchor` is the
/// centroid of the fitted points.
struct SurfaceModel {
  SurfaceKind kind = SurfaceKind::Plane;
  Vec3 anchor = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();

  /// Component of u along the normal direction of the surface:
  /// n n^T u for planes, (I - v v^T) u for lines. This is the part of u
  /// that moves a point toward or away from the surface.
  Vec3 project_along_normal(const Vec3& u) const {
    if (kind == SurfaceKind::Plane) {
      return direction * direction.dot(u);
    }
    return u - direction * direction.dot(u);
  }

  /// Squared perpendicular distance from p to the surface.
  double cost(const Vec3& p) const {
    return project_along_normal(p - anchor).squaredNorm();
  }
};

inline Vec3 project_along_normal(const SurfaceModel& model, const Vec3& u) {
  return model.project_along_normal(u);
}

}  // namespace sloam
