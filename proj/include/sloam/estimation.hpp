#pragma once

#include "sloam/core.hpp"
#include "sloam/features.hpp"
#include "sloam/loss.hpp"
#include "sloam/matching.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace sloam {

struct InsufficientMatches : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct RegistrationFailed : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SolverConfig {
  int iters_max_outer = 8;   // registration passes (match + solve)
  int iters_max_orme = 8;    // rejection/re-estimation rounds per pass
  LossSchedule odometry_schedule = {{LossKind::Huber, 0.1, 4},
                                    {LossKind::Arctan, 0.1, 4}};
  LossSchedule map_schedule = {{LossKind::Arctan, 0.1, 4}};
  int map_iters_max_outer = 4;
  double convergence_eps_trans = 0.01;  // meters
  double convergence_eps_rot = 0.001;   // radians
  double r_tol = 0.4;
  double cost_tol = 0.4;      // squared meters
  double eps_motion = 1e-6;   // guard for the ratio denominator
  int min_matches = 10;
  bool use_orme = true;
  bool orme_in_map = true;
  bool early_terminate = true;  // stop passes once ORME converges by round 2

  // Inner Levenberg-Marquardt loop.
  int lm_max_iterations = 30;
  double lm_step_eps_trans = 1e-9;
  double lm_step_eps_rot = 1e-9;
};

/// Perpendicular offset of the transformed source point from its matched
/// surface. Its squared norm is the match cost.
inline Vec3 residual(const Match& match, const RigidTransform& T) {
  return match.model.project_along_normal(T * match.source.point.position -
                                          match.model.anchor);
}

/// Jacobian of the residual wrt a left-multiplied body increment
/// [dtheta; dt]: T(delta) = (exp(dtheta) q, t + dt).
inline Eigen::Matrix<double, 3, 6> residual_jacobian(const Match& match,
                                                     const RigidTransform& T) {
  const Vec3 rotated = T.q * match.source.point.position;
  Mat3 projector;
  const Vec3& d = match.model.direction;
  if (match.model.kind == SurfaceKind::Plane) {
    projector = d * d.transpose();
  } else {
    projector = Mat3::Identity() - d * d.transpose();
  }
  Eigen::Matrix<double, 3, 6> J;
  J.leftCols<3>() = -projector * skew(rotated);
  J.rightCols<3>() = projector;
  return J;
}

inline RigidTransform retract(const RigidTransform& T,
                              const Eigen::Matrix<double, 6, 1>& delta) {
  RigidTransform out;
  out.q = (quat_exp(delta.head<3>()) * T.q).normalized();
  out.t = T.t + delta.tail<3>();
  return out;
}

/// Robust mean of squared perpendicular distances.
inline double objective(const std::vector<Match>& matches,
                        const RigidTransform& T, const LossFunction& loss) {
  double total = 0.0;
  for (const auto& m : matches) {
    total += loss.rho(residual(m, T).squaredNorm());
  }
  return total / static_cast<double>(matches.size());
}

/// Levenberg-Marquardt over all matches: minimizes the robust mean of
/// squared point-to-plane / point-to-line distances. Steps are only
/// accepted when they lower the objective.
inline RigidTransform estimate_transformation(const RigidTransform& T_init,
                                              const std::vector<Match>& matches,
                                              const LossFunction& loss,
                                              const SolverConfig& cfg) {
  if (static_cast<int>(matches.size()) < cfg.min_matches) {
    throw InsufficientMatches("only " + std::to_string(matches.size()) +
                              " matches, need " + std::to_string(cfg.min_matches));
  }

  RigidTransform T = T_init;
  double cost = objective(matches, T, loss);
  if (!std::isfinite(cost)) throw SolverDiverged("non-finite initial objective");

  const double n = static_cast<double>(matches.size());
  double lambda = 1e-4;

  for (int iter = 0; iter < cfg.lm_max_iterations; ++iter) {
    Eigen::Matrix<double, 6, 6> H = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (const auto& m : matches) {
      const Vec3 r = residual(m, T);
      const auto J = residual_jacobian(m, T);
      const double w = loss.weight(r.squaredNorm());
      H.noalias() += w * J.transpose() * J;
      g.noalias() += w * J.transpose() * r;
    }
    H /= n;
    g /= n;

    bool stepped = false;
    for (int attempt = 0; attempt < 12; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = H;
      for (int i = 0; i < 6; ++i) {
        damped(i, i) += lambda * std::max(H(i, i), 1e-12);
      }
      const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) throw SolverDiverged("non-finite LM step");

      const RigidTransform T_new = retract(T, delta);
      const double cost_new = objective(matches, T_new, loss);
      if (!std::isfinite(cost_new)) throw SolverDiverged("non-finite objective");

      if (cost_new < cost) {
        T = T_new;
        cost = cost_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (delta.head<3>().norm() < cfg.lm_step_eps_rot &&
            delta.tail<3>().norm() < cfg.lm_step_eps_trans) {
          return T;
        }
        break;
      }
      lambda *= 4.0;
      if (lambda > 1e12) break;
    }
    if (!stepped) break;  // no descent direction left
  }
  return T;
}

enum class MatchVerdict { Inlier, Outlier };

/// Displacement of the source point between the pass-initial and current
/// transform, split into its components along and across the matched
/// surface normal.
struct RejectionDiagnostics {
  Vec3 u = Vec3::Zero();
  double u_along = 0.0;
  double u_perp = 0.0;
  double ratio = 0.0;
  double cost_old = 0.0;
  double cost_new = 0.0;
};

/// The rejection rule: a match is an inlier when its current cost is below
/// cost_tol, or when the point moved mostly along the surface normal
/// (ratio < r_tol) while its cost decreased. A displacement with almost no
/// normal component skips the ratio test and keeps only the cost tests.
inline MatchVerdict classify_match(const RigidTransform& T_initial,
                                   const RigidTransform& T, const Match& match,
                                   double r_tol, double cost_tol,
                                   double eps_motion,
                                   RejectionDiagnostics* diag = nullptr) {
  const Vec3 p_old = T_initial * match.source.point.position;
  const Vec3 p_new = T * match.source.point.position;
  const Vec3 u = p_new - p_old;
  const Vec3 u_along = match.model.project_along_normal(u);
  const Vec3 u_perp = u - u_along;

  const double along = u_along.norm();
  const double perp = u_perp.norm();
  const double ratio = perp / std::max(along, eps_motion);
  const double cost_old = match.model.cost(p_old);
  const double cost_new = match.model.cost(p_new);

  if (diag) {
    *diag = RejectionDiagnostics{u, along, perp, ratio, cost_old, cost_new};
  }

  if (cost_new < cost_tol) return MatchVerdict::Inlier;
  if (cost_new < cost_old && (along < eps_motion || ratio < r_tol)) {
    return MatchVerdict::Inlier;
  }
  return MatchVerdict::Outlier;
}

struct OrmeResult {
  RigidTransform T;
  std::vector<Match> inliers;
  int iterations = 0;
  bool converged = false;
};

/// Outliers Rejection and Motion Estimation: solve with all matches first,
/// then alternate between re-classifying matches against the latest
/// transform and re-solving with inliers only, warm-started, until the
/// transform converges or the round budget runs out.
inline OrmeResult orme(const RigidTransform& T_initial,
                       const std::vector<Match>& matches,
                       const LossFunction& loss, const SolverConfig& cfg) {
  OrmeResult result;
  result.T = T_initial;

  const int iters_max = cfg.use_orme ? cfg.iters_max_orme : 1;
  for (int iter = 1; iter <= iters_max; ++iter) {
    std::vector<Match> selected;
    if (iter == 1) {
      selected = matches;
    } else {
      selected.reserve(matches.size());
      for (const auto& m : matches) {
        if (classify_match(T_initial, result.T, m, cfg.r_tol, cfg.cost_tol,
                           cfg.eps_motion) == MatchVerdict::Inlier) {
          selected.push_back(m);
        }
      }
    }
    if (static_cast<int>(selected.size()) < cfg.min_matches) {
      throw InsufficientMatches("inlier set collapsed to " +
                                std::to_string(selected.size()) + " matches");
    }

    const RigidTransform T_before = result.T;
    result.T = estimate_transformation(result.T, selected, loss, cfg);
    result.inliers = std::move(selected);
    result.iterations = iter;

    if (result.T.translation_delta(T_before) < cfg.convergence_eps_trans &&
        result.T.rotation_delta(T_before) < cfg.convergence_eps_rot) {
      result.converged = true;
      break;
    }
  }
  return result;
}

struct OdometryConfig {
  FeatureConfig features;
  MatchingConfig matching;
  SolverConfig solver;
  int n_skipped = 0;
};

struct OdometryResult {
  RigidTransform T;
  int passes = 0;
  std::size_t match_count = 0;
  std::size_t inlier_count = 0;
};

/// The registration passes shared by scan-to-scan odometry and
/// scan-to-map refinement: re-assign matches with the latest transform,
/// run ORME, repeat until the transform settles.
inline OdometryResult register_keypoints(const KeypointSets& keypoints,
                                         const SemanticNnForest& target_forest,
                                         const RigidTransform& T_init,
                                         const LossSchedule& schedule,
                                         int iters_max_outer,
                                         const OdometryConfig& cfg) {
  OdometryResult result;
  result.T = T_init;
  int failed_passes = 0;

  for (int pass = 1; pass <= iters_max_outer; ++pass) {
    const LossFunction loss = loss_at_pass(schedule, pass);
    const auto matches = assign_matches(keypoints, target_forest, result.T,
                                        cfg.matching, cfg.n_skipped);
    result.passes = pass;

    OrmeResult orme_result;
    try {
      orme_result = orme(result.T, matches, loss, cfg.solver);
    } catch (const InsufficientMatches&) {
      ++failed_passes;
      // The transform did not change, so further passes would re-derive
      // the same matches; only the loss schedule advances.
      continue;
    }

    const RigidTransform T_before = result.T;
    result.T = orme_result.T;
    result.match_count = matches.size();
    result.inlier_count = orme_result.inliers.size();

    if (cfg.solver.use_orme && cfg.solver.early_terminate &&
        orme_result.converged && orme_result.iterations <= 2) {
      break;
    }
    if (result.T.translation_delta(T_before) < cfg.solver.convergence_eps_trans &&
        result.T.rotation_delta(T_before) < cfg.solver.convergence_eps_rot) {
      break;
    }
  }

  if (failed_passes == result.passes) {
    throw RegistrationFailed("no pass found enough matches");
  }
  return result;
}

/// Scan-to-scan semantic odometry: estimates the motion that maps points
/// from the current scan's frame into the previous scan's frame,
/// initialized from the previous motion estimate.
inline RigidTransform semantic_lidar_odometry(const LabeledScan& current,
                                              const LabeledScan& previous,
                                              const RigidTransform& prev_motion,
                                              const OdometryConfig& cfg,
                                              const SemanticTaxonomy& taxonomy) {
  const KeypointSets kp_current = extract_keypoints(current, cfg.features, taxonomy);
  const KeypointSets kp_previous = extract_keypoints(previous, cfg.features, taxonomy);
  const SemanticNnForest forest =
      build_forest(kp_previous, cfg.matching.use_semantics);
  return register_keypoints(kp_current, forest, prev_motion,
                            cfg.solver.odometry_schedule,
                            cfg.solver.iters_max_outer, cfg)
      .T;
}

}  // namespace sloam
