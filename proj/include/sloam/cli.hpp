#pragma once

#include "sloam/config.hpp"
#include "sloam/evaluation.hpp"
#include "sloam/kitti.hpp"
#include "sloam/mapping.hpp"
#include "sloam/plot.hpp"
#include "sloam/ply.hpp"
#include "sloam/synthetic.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <string>
#include <vector>

namespace sloam {

namespace detail {

inline std::vector<std::filesystem::path> list_scan_files(
    const std::filesystem::path& velodyne_dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(velodyne_dir)) {
    if (entry.path().extension() == ".bin") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string frame_name(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

}  // namespace detail

/// Processes one sequence end to end and writes the estimated trajectory,
/// a per-frame timing log, and optionally the aggregated map.
inline int cmd_run(const RunConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  if (cfg.data_root.empty())
    throw IoError("no dataset root: pass --data-root or set SLOAM_DATA_ROOT");

  const fs::path seq_dir = fs::path(cfg.data_root) / "sequences" / cfg.sequence;
  const fs::path velodyne_dir = seq_dir / "velodyne";
  if (!fs::exists(velodyne_dir))
    throw IoError("dataset not found: " + velodyne_dir.string());
  const std::vector<fs::path> scan_files = detail::list_scan_files(velodyne_dir);
  if (scan_files.empty())
    throw IoError("no .bin scans in " + velodyne_dir.string());

  const fs::path label_dir = seq_dir / "labels";
  const bool have_labels = fs::exists(label_dir);
  if (!have_labels)
    log << "no labels directory; running unlabeled (class 0 everywhere)\n";

  std::vector<std::size_t> kept;
  const std::size_t stride = static_cast<std::size_t>(cfg.skip) + 1;
  for (std::size_t i = 0; i < scan_files.size(); i += stride) kept.push_back(i);
  if (cfg.max_frames > 0 && kept.size() > cfg.max_frames)
    kept.resize(cfg.max_frames);

  PipelineConfig pipeline_cfg = cfg.pipeline_config();
  IngestFilter ingest = pipeline_cfg.ingest;
  if (!have_labels) ingest.drop_unlabeled = false;

  Pipeline pipeline(pipeline_cfg);

  struct TimingRow {
    std::size_t frame;
    double seconds;
    std::size_t matches, inliers;
    bool odometry_fallback, map_fallback;
  };
  std::vector<TimingRow> timing;
  timing.reserve(kept.size());

  for (std::size_t k = 0; k < kept.size(); ++k) {
    const std::size_t idx = kept[k];
    const auto t0 = std::chrono::steady_clock::now();
    LabeledScan scan;
    try {
      scan = read_velodyne_bin(scan_files[idx].string(), idx);
      if (have_labels) {
        const fs::path label_path =
            label_dir / (scan_files[idx].stem().string() + ".label");
        read_labels(label_path.string(), scan);
      }
    } catch (const IoError& e) {
      throw IoError("frame " + std::to_string(idx) + ": " + e.what());
    }
    apply_ingest_filter(scan, ingest);

    FrameResult result;
    try {
      result = pipeline.process_frame(scan);
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(idx) + ": " + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    timing.push_back({idx, seconds, result.match_count, result.inlier_count,
                      result.odometry_failed, result.map_refine_failed});
    if (k % 20 == 0 || k + 1 == kept.size()) {
      log << "frame " << k + 1 << "/" << kept.size() << " (dataset index "
          << idx << "), " << result.match_count << " matches\n";
    }
  }

  fs::create_directories(cfg.output_dir);
  const fs::path pose_path = fs::path(cfg.output_dir) / (cfg.sequence + ".txt");
  write_poses(pose_path.string(), pipeline.poses());
  log << "wrote " << pipeline.poses().size() << " poses to " << pose_path.string()
      << "\n";

  const fs::path timing_path =
      fs::path(cfg.output_dir) / ("timing_" + cfg.sequence + ".csv");
  {
    std::ofstream out(timing_path);
    if (!out) throw IoError("cannot write " + timing_path.string());
    out << "frame,seconds,matches,inliers,odometry_fallback,map_fallback\n";
    char line[128];
    double total = 0.0;
    for (const auto& row : timing) {
      std::snprintf(line, sizeof(line), "%zu,%.6f,%zu,%zu,%d,%d\n", row.frame,
                    row.seconds, row.matches, row.inliers,
                    row.odometry_fallback ? 1 : 0, row.map_fallback ? 1 : 0);
      out << line;
      total += row.seconds;
    }
    log << "mean frame time " << (timing.empty() ? 0.0 : total / timing.size())
        << " s\n";
  }

  if (cfg.export_map) {
    const fs::path map_path =
        fs::path(cfg.output_dir) / ("map_" + cfg.sequence + ".ply");
    write_ply(map_path.string(), pipeline.map().export_points(),
              pipeline.taxonomy());
    log << "wrote map to " << map_path.string() << "\n";
  }
  return 0;
}

/// Compares an estimated trajectory against ground truth and prints the
/// segment-error report. A calibration file conjugates the estimate into
/// the ground-truth frame first.
inline int cmd_eval(const EvalConfig& cfg, std::ostream& out) {
  std::vector<RigidTransform> gt = read_poses(cfg.gt_path);
  std::vector<RigidTransform> est = read_poses(cfg.est_path);
  if (!cfg.calib_path.empty()) {
    const RigidTransform tr = load_calibration(cfg.calib_path);
    est = conjugate_poses(est, tr);
  }
  const std::vector<SegmentError> errors = trajectory_error(est, gt, cfg.metric);
  const TrajectorySummary summary =
      summarize(errors, std::filesystem::path(cfg.est_path).stem().string());
  out << summary_table({summary});
  if (!cfg.csv_path.empty()) {
    std::ofstream csv(cfg.csv_path);
    if (!csv) throw IoError("cannot write " + cfg.csv_path);
    csv << summary_csv({summary});
  }
  return 0;
}

/// Overlays any number of pose files in one top-down SVG figure, with a
/// CSV of the planar tracks on request.
inline int cmd_plot(const std::vector<std::string>& pose_files,
                    const std::string& svg_path, const std::string& csv_path,
                    const PlotConfig& plot_cfg, std::ostream& log) {
  std::vector<NamedTrack> tracks;
  tracks.reserve(pose_files.size());
  for (const auto& file : pose_files) {
    NamedTrack track;
    track.name = std::filesystem::path(file).stem().string();
    track.poses = read_poses(file);
    tracks.push_back(std::move(track));
  }
  write_trajectory_svg(svg_path, tracks, plot_cfg);
  log << "wrote " << svg_path << "\n";
  if (!csv_path.empty()) {
    write_trajectory_csv(csv_path, tracks, plot_cfg);
    log << "wrote " << csv_path << "\n";
  }
  return 0;
}

/// Generates a labeled synthetic dataset in the on-disk layout the run
/// command expects, with ground-truth poses and an identity calibration.
inline int cmd_synth(const SyntheticSceneConfig& scene_cfg,
                     const std::string& data_root, const std::string& sequence,
                     std::ostream& log) {
  namespace fs = std::filesystem;
  if (data_root.empty())
    throw IoError("no dataset root: pass --data-root or set SLOAM_DATA_ROOT");

  const SyntheticScene scene(scene_cfg);
  const fs::path seq_dir = fs::path(data_root) / "sequences" / sequence;
  fs::create_directories(seq_dir / "velodyne");
  fs::create_directories(seq_dir / "labels");

  for (int i = 0; i < scene.frame_count(); ++i) {
    const LabeledScan scan = scene.scan(i);
    const std::string name = detail::frame_name(static_cast<std::size_t>(i));
    write_velodyne_bin((seq_dir / "velodyne" / (name + ".bin")).string(),
                       scan.points);
    write_labels((seq_dir / "labels" / (name + ".label")).string(), scan.points);
  }
  write_poses((seq_dir / "poses.txt").string(), scene.poses());
  {
    std::ofstream calib(seq_dir / "calib.txt");
    if (!calib) throw IoError("cannot write calib.txt");
    calib << "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n";
  }
  log << "wrote " << scene.frame_count() << " frames to " << seq_dir.string()
      << "\n";
  return 0;
}

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Semantic lidar odometry and mapping"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  EvalConfig eval_cfg;
  SyntheticSceneConfig synth_cfg;
  std::string synth_root, synth_sequence = "00";
  std::vector<std::string> plot_files;
  std::string plot_svg = "trajectories.svg", plot_csv, plot_axes = "xz";

  CLI::App* run = app.add_subcommand("run", "Process a sequence");
  run->add_option("--data-root", run_cfg.data_root,
                  "Dataset root containing sequences/<id>")
      ->envname("SLOAM_DATA_ROOT");
  run->add_option("--sequence", run_cfg.sequence, "Sequence id");
  run->add_option("--output", run_cfg.output_dir, "Output directory");
  run->add_option("--skip", run_cfg.skip, "Scans skipped between kept frames")
      ->check(CLI::NonNegativeNumber);
  run->add_option("--max-frames", run_cfg.max_frames,
                  "Stop after this many kept frames (0 = all)");
  run->add_flag("--use-semantics,!--no-semantics", run_cfg.use_semantics,
                "Class-gated matching on/off");
  run->add_flag("--use-orme,!--no-orme", run_cfg.use_orme,
                "Outlier rejection loop on/off");
  run->add_flag("--export-map", run_cfg.export_map, "Write the map as PLY");
  run->add_flag("--scan-to-map,!--no-scan-to-map", run_cfg.scan_to_map,
                "Map-refinement stage on/off");

  run->add_option("--features.window", run_cfg.features.window);
  run->add_option("--features.regions", run_cfg.features.regions);
  run->add_option("--features.max-edge-per-region",
                  run_cfg.features.max_edge_per_region);
  run->add_option("--features.max-planar-per-region",
                  run_cfg.features.max_planar_per_region);
  run->add_option("--features.edge-threshold", run_cfg.features.edge_threshold);
  run->add_option("--features.planar-threshold",
                  run_cfg.features.planar_threshold);
  run->add_option("--features.suppression", run_cfg.features.suppression);
  run->add_option("--features.range-jump-fraction",
                  run_cfg.features.range_jump_fraction);
  run->add_option("--matching.k-plane", run_cfg.matching.k_plane);
  run->add_option("--matching.k-line", run_cfg.matching.k_line);
  run->add_option("--matching.base-max-dist", run_cfg.matching.base_max_dist);
  run->add_option("--matching.planarity-ratio", run_cfg.matching.planarity_ratio);
  run->add_option("--matching.linearity-ratio", run_cfg.matching.linearity_ratio);
  run->add_option("--solver.iters-max-outer", run_cfg.solver.iters_max_outer);
  run->add_option("--solver.iters-max-orme", run_cfg.solver.iters_max_orme);
  run->add_option("--solver.map-iters-max-outer",
                  run_cfg.solver.map_iters_max_outer);
  run->add_option("--solver.r-tol", run_cfg.solver.r_tol);
  run->add_option("--solver.cost-tol", run_cfg.solver.cost_tol);
  run->add_option("--solver.min-matches", run_cfg.solver.min_matches);
  run->add_option("--solver.convergence-eps-trans",
                  run_cfg.solver.convergence_eps_trans);
  run->add_option("--solver.convergence-eps-rot",
                  run_cfg.solver.convergence_eps_rot);
  run->add_option("--mapping.edge-voxel", run_cfg.mapping.edge_voxel);
  run->add_option("--mapping.planar-voxel", run_cfg.mapping.planar_voxel);
  run->add_option("--mapping.raw-voxel", run_cfg.mapping.raw_voxel);
  run->add_option("--mapping.half-extent", run_cfg.mapping.half_extent);
  run->add_option("--ingest.min-range", run_cfg.ingest.min_range);
  run->add_option("--ingest.max-range", run_cfg.ingest.max_range);
  run->add_flag("--ingest.drop-unlabeled,!--ingest.keep-unlabeled",
                run_cfg.ingest.drop_unlabeled);
  std::string run_config_path;
  run->add_option("--config", run_config_path, "Config file (flat dotted keys)")
      ->check(CLI::ExistingFile);
  // Dotted keys such as solver.r-tol are whole option names, not sections.
  run->get_config_formatter_base()->parentSeparator('\x1f');

  CLI::App* eval = app.add_subcommand("eval", "Score a trajectory");
  eval->add_option("--gt", eval_cfg.gt_path, "Ground-truth pose file")
      ->required();
  eval->add_option("--est", eval_cfg.est_path, "Estimated pose file")
      ->required();
  eval->add_option("--calib", eval_cfg.calib_path,
                   "Calibration file; conjugates the estimate");
  eval->add_option("--csv", eval_cfg.csv_path, "Write the report as CSV");
  eval->add_option("--lengths", eval_cfg.metric.lengths,
                   "Segment lengths in meters")
      ->delimiter(',');
  eval->add_option("--stride", eval_cfg.metric.start_stride,
                   "Frames between segment starts");

  CLI::App* plot = app.add_subcommand("plot", "Draw trajectories as SVG");
  plot->add_option("files", plot_files, "Pose files to overlay")
      ->required()
      ->expected(-1);
  plot->add_option("--svg", plot_svg, "Output SVG path");
  plot->add_option("--csv", plot_csv, "Optional CSV of planar tracks");
  plot->add_option("--axes", plot_axes, "Plane to draw: xz or xy")
      ->check(CLI::IsMember({"xz", "xy"}));

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--data-root", synth_root, "Dataset root to write into")
      ->envname("SLOAM_DATA_ROOT");
  synth->add_option("--sequence", synth_sequence, "Sequence id to create");
  synth->add_option("--frames", synth_cfg.n_frames, "Frame count");
  synth->add_option("--base-speed", synth_cfg.base_speed,
                    "Mean travel per frame, meters");
  synth->add_option("--speed-wobble", synth_cfg.speed_wobble,
                    "Fractional speed variation");
  synth->add_option("--noise", synth_cfg.noise_sigma,
                    "Radial noise half-width, meters");
  synth->add_option("--outliers", synth_cfg.outlier_fraction,
                    "Fraction of returns displaced off-surface");
  synth->add_option("--seed", synth_cfg.seed, "Noise seed");
  synth->add_option("--rings", synth_cfg.sensor.rings, "Beam count");
  synth->add_option("--azimuth-steps", synth_cfg.sensor.azimuth_steps,
                    "Rays per ring revolution");
  bool synth_no_dynamic = false;
  synth->add_flag("--no-dynamic", synth_no_dynamic,
                  "Leave the moving object out of the scene");

  try {
    app.parse(argc, argv);
    // Config files fill only options the command line left untouched, so
    // flags always win over the file.
    if (run->parsed() && !run_config_path.empty()) {
      std::ifstream config_stream(run_config_path);
      run->parse_from_stream(config_stream);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (run->parsed()) return cmd_run(run_cfg, std::cout);
    if (eval->parsed()) return cmd_eval(eval_cfg, std::cout);
    if (plot->parsed()) {
      PlotConfig plot_cfg;
      if (plot_axes == "xy") {
        plot_cfg.axis_horizontal = 0;
        plot_cfg.axis_vertical = 1;
      }
      return cmd_plot(plot_files, plot_svg, plot_csv, plot_cfg, std::cout);
    }
    if (synth->parsed()) {
      synth_cfg.with_dynamic_object = !synth_no_dynamic;
      return cmd_synth(synth_cfg, synth_root, synth_sequence, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sloam
