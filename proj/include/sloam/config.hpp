#pragma once

#include "sloam/estimation.hpp"
#include "sloam/evaluation.hpp"
#include "sloam/features.hpp"
#include "sloam/kitti.hpp"
#include "sloam/mapping.hpp"
#include "sloam/matching.hpp"

#include <cstddef>
#include <string>

namespace sloam {

/// Everything a processing run needs, loadable from config file and
/// command line. The ablation flags select the four run modes: full
/// system, class-agnostic matching, no rejection loop, and bare scan
/// matching with neither.
struct RunConfig {
  std::string data_root;
  std::string sequence = "00";
  std::string output_dir = "out";
  int skip = 0;
  std::size_t max_frames = 0;  // 0 = whole sequence

  bool use_semantics = true;
  bool use_orme = true;
  bool export_map = false;
  bool scan_to_map = true;

  FeatureConfig features;
  MatchingConfig matching;
  SolverConfig solver;
  MappingConfig mapping;
  IngestFilter ingest;

  /// Materializes the pipeline configuration with the ablation flags and
  /// skip count applied. Class-agnostic mode ignores labels entirely, so
  /// dynamic-class filtering of keypoints is disabled with it; the map
  /// still refuses dynamic points regardless.
  PipelineConfig pipeline_config() const {
    PipelineConfig cfg;
    cfg.odometry.features = features;
    cfg.odometry.features.exclude_dynamic = use_semantics;
    cfg.odometry.matching = matching;
    cfg.odometry.matching.use_semantics = use_semantics;
    cfg.odometry.solver = solver;
    cfg.odometry.solver.use_orme = use_orme;
    cfg.odometry.n_skipped = skip;
    cfg.mapping = mapping;
    cfg.ingest = ingest;
    cfg.scan_to_map = scan_to_map;
    return cfg;
  }
};

struct EvalConfig {
  std::string gt_path;
  std::string est_path;
  std::string calib_path;  // optional; conjugates the estimate when given
  std::string csv_path;    // optional CSV report destination
  TrajectoryErrorConfig metric;
};

}  // namespace sloam
