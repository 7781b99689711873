#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace sloam {

enum class LossKind { Squared, Huber, Arctan };

/// Robust loss over the squared residual norm s = ||r||^2, in the Ceres
/// convention: rho(s) is the robustified cost, rho'(s) the IRLS weight.
/// `scale` is expressed in residual-norm units (meters).
struct LossFunction {
  LossKind kind = LossKind::Squared;
  double scale = 0.1;

  double rho(double s) const {
    switch (kind) {
      case LossKind::Squared:
        return s;
      case LossKind::Huber: {
        const double d2 = scale * scale;
        if (s <= d2) return s;
        return 2.0 * scale * std::sqrt(s) - d2;
      }
      case LossKind::Arctan: {
        const double a = scale * scale;
        return a * std::atan(s / a);
      }
    }
    return s;
  }

  double weight(double s) const {
    switch (kind) {
      case LossKind::Squared:
        return 1.0;
      case LossKind::Huber: {
        const double d2 = scale * scale;
        if (s <= d2) return 1.0;
        return scale / std::sqrt(s);
      }
      case LossKind::Arctan: {
        const double a = scale * scale;
        const double z = s / a;
        return 1.0 / (1.0 + z * z);
      }
    }
    return 1.0;
  }
};

/// One stage of a loss schedule: this loss for `iterations` registration
/// passes, then the next stage.
struct LossStage {
  LossKind kind = LossKind::Huber;
  double scale = 0.1;
  int iterations = 4;
};

using LossSchedule = std::vector<LossStage>;

/// Loss used at a given 1-based registration pass. Passes beyond the
/// schedule keep the last stage's loss.
inline LossFunction loss_at_pass(const LossSchedule& schedule, int pass) {
  LossFunction out;
  if (schedule.empty()) return out;
  int consumed = 0;
  for (const auto& stage : schedule) {
    consumed += stage.iterations;
    if (pass <= consumed) return LossFunction{stage.kind, stage.scale};
  }
  return LossFunction{schedule.back().kind, schedule.back().scale};
}

inline int schedule_passes(const LossSchedule& schedule) {
  int n = 0;
  for (const auto& stage : schedule) n += stage.iterations;
  return n;
}

inline std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Squared: return "squared";
    case LossKind::Huber: return "huber";
    case LossKind::Arctan: return "arctan";
  }
  return "squared";
}

}  // namespace sloam
