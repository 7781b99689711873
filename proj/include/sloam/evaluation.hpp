#pragma once

#include "sloam/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sloam {

/// Keeps frames 0, n+1, 2(n+1), ... Emulates a sensor scanning at a higher
/// platform speed by discarding n scans between consecutive kept ones.
template <typename T>
std::vector<T> skip_scans(const std::vector<T>& frames, int n_skipped) {
  if (n_skipped < 0) throw std::invalid_argument("n_skipped must be >= 0");
  std::vector<T> out;
  const std::size_t stride = static_cast<std::size_t>(n_skipped) + 1;
  out.reserve(frames.size() / stride + 1);
  for (std::size_t i = 0; i < frames.size(); i += stride) out.push_back(frames[i]);
  return out;
}

struct SegmentError {
  std::size_t first_frame = 0;
  double length = 0.0;      // actual ground-truth path length, meters
  double trans_error = 0.0; // fraction of segment length
  double rot_error = 0.0;   // rad per meter
};

struct TrajectoryErrorConfig {
  std::vector<double> lengths = {100, 200, 300, 400, 500, 600, 700, 800};
  std::size_t start_stride = 10;
};

class EvaluationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
 public:
  explicit EvaluationError(const std::string& what)
      : std::runtime_error(what) {}
};

class TrajectoryTooShort : public EvaluationError {
 public:
  explicit TrajectoryTooShort(const std::string& what)
      : EvaluationError(what) {}
};

namespace detail {

inline std::vector<double> cumulative_distances(
    const std::vector<RigidTransform>& poses) {
  std::vector<double> dist(poses.size(), 0.0);
  for (std::size_t i = 1; i < poses.size(); ++i)
    dist[i] = dist[i - 1] + (poses[i].t - poses[i - 1].t).norm();
  return dist;
}

/// First index whose cumulative distance exceeds dist[first] + length,
/// or npos when the trajectory is not long enough.
inline std::size_t segment_end(const std::vector<double>& dist,
                               std::size_t first, double length) {
  for (std::size_t i = first + 1; i < dist.size(); ++i)
    if (dist[i] > dist[first] + length) return i;
  return static_cast<std::size_t>(-1);
}

inline double rotation_angle(const Mat3& R) {
  const double c = std::clamp((R.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace detail

/// Per-segment relative errors between an estimated and a ground-truth
/// trajectory, both given as poses in the same frame at matching indices.
/// For each start (every start_stride frames) and each nominal length, the
/// segment ends at the first frame whose ground-truth path distance from
/// the start exceeds the nominal length; the translational error of the
/// relative-pose discrepancy is divided by the actual path length covered.
inline std::vector<SegmentError> trajectory_error(
    const std::vector<RigidTransform>& estimated,
    const std::vector<RigidTransform>& ground_truth,
    const TrajectoryErrorConfig& cfg = {}) {
  if (estimated.size() != ground_truth.size())
    throw EvaluationError("trajectory size mismatch: estimated " +
                          std::to_string(estimated.size()) + " vs ground truth " +
                          std::to_string(ground_truth.size()));
  if (ground_truth.size() < 2)
    throw TrajectoryTooShort("need at least two poses");

  const std::vector<double> dist = detail::cumulative_distances(ground_truth);

  std::vector<SegmentError> errors;
  for (std::size_t first = 0; first < ground_truth.size();
       first += cfg.start_stride) {
    for (double length : cfg.lengths) {
      const std::size_t last = detail::segment_end(dist, first, length);
      if (last == static_cast<std::size_t>(-1)) continue;

      const RigidTransform gt_rel =
          ground_truth[first].inverse() * ground_truth[last];
      const RigidTransform est_rel =
          estimated[first].inverse() * estimated[last];
      const RigidTransform delta = gt_rel.inverse() * est_rel;

      const double actual = dist[last] - dist[first];
      SegmentError e;
      e.first_frame = first;
      e.length = actual;
      e.trans_error = delta.t.norm() / actual;
      e.rot_error = detail::rotation_angle(delta.q.toRotationMatrix()) / actual;
      errors.push_back(e);
    }
  }
  if (errors.empty())
    throw TrajectoryTooShort(
        "trajectory shorter than the smallest evaluation length");
  return errors;
}

struct TrajectorySummary {
  std::string name;
  std::size_t segments = 0;
  double trans_error_percent = 0.0; // mean over segments, percent
  double rot_error_deg_per_m = 0.0; // mean over segments, deg/m
};

inline TrajectorySummary summarize(const std::vector<SegmentError>& errors,
                                   std::string name = {}) {
  TrajectorySummary s;
  s.name = std::move(name);
  s.segments = errors.size();
  if (errors.empty()) return s;
  double trans = 0.0, rot = 0.0;
  for (const auto& e : errors) {
    trans += e.trans_error;
    rot += e.rot_error;
  }
  s.trans_error_percent = trans / errors.size() * 100.0;
  s.rot_error_deg_per_m = rot / errors.size() * 180.0 / M_PI;
  return s;
}

/// Unweighted mean of per-sequence mean errors.
inline TrajectorySummary macro_average(
    const std::vector<TrajectorySummary>& summaries) {
  TrajectorySummary avg;
  avg.name = "average";
  if (summaries.empty()) return avg;
  for (const auto& s : summaries) {
    avg.segments += s.segments;
    avg.trans_error_percent += s.trans_error_percent;
    avg.rot_error_deg_per_m += s.rot_error_deg_per_m;
  }
  avg.trans_error_percent /= summaries.size();
  avg.rot_error_deg_per_m /= summaries.size();
  return avg;
}

inline std::string summary_table(const std::vector<TrajectorySummary>& rows) {
  std::string out =
      "sequence       segments   trans err [%]   rot err [deg/m]\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-14s %8zu %15.4f %17.6f\n",
                  r.name.c_str(), r.segments, r.trans_error_percent,
                  r.rot_error_deg_per_m);
    out += line;
  }
  return out;
}

inline std::string summary_csv(const std::vector<TrajectorySummary>& rows) {
  std::string out = "sequence,segments,trans_error_percent,rot_error_deg_per_m\n";
  char line[128];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%zu,%.9f,%.9f\n", r.name.c_str(),
                  r.segments, r.trans_error_percent, r.rot_error_deg_per_m);
    out += line;
  }
  return out;
}

}  // namespace sloam
