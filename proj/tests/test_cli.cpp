#include "sloam/cli.hpp"

#include "helpers.hpp"

#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace sloam;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SyntheticSceneConfig tiny_scene(int n_frames) {
  SyntheticSceneConfig cfg;
  cfg.n_frames = n_frames;
  return cfg;
}

int run_cli(std::vector<std::string> args) {
  std::vector<const char*> argv;
  argv.push_back("sloam");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::vector<RigidTransform> straight_poses(std::size_t n, double spacing) {
  std::vector<RigidTransform> poses(n);
  for (std::size_t i = 0; i < n; ++i) poses[i].t = Vec3(spacing * i, 0, 0);
  return poses;
}

}  // namespace

TEST_CASE("synthetic dataset generation writes the expected layout") {
  const fs::path root = fresh_dir("sloam_test_cli_synth");
  std::ostringstream log;
  REQUIRE(cmd_synth(tiny_scene(3), root.string(), "00", log) == 0);

  const fs::path seq = root / "sequences" / "00";
  for (const char* name : {"000000", "000001", "000002"}) {
    CHECK(fs::exists(seq / "velodyne" / (std::string(name) + ".bin")));
    CHECK(fs::exists(seq / "labels" / (std::string(name) + ".label")));
  }
  CHECK_FALSE(fs::exists(seq / "velodyne" / "000003.bin"));
  REQUIRE(fs::exists(seq / "poses.txt"));
  REQUIRE(fs::exists(seq / "calib.txt"));

  const auto poses = read_poses((seq / "poses.txt").string());
  REQUIRE(poses.size() == 3);
  CHECK(poses[0].t.norm() < 1e-12);
  CHECK(poses[0].q.angularDistance(Quat::Identity()) < 1e-12);

  // The scans round-trip through the reader with labels attached.
  auto scan = read_velodyne_bin((seq / "velodyne" / "000000.bin").string(), 0);
  read_labels((seq / "labels" / "000000.label").string(), scan);
  REQUIRE(scan.points.size() > 1000);
  const auto taxonomy = SemanticTaxonomy::semantic_kitti();
  for (const auto& pt : scan.points) CHECK(taxonomy.is_known(pt.class_id));

  const RigidTransform tr = load_calibration((seq / "calib.txt").string());
  CHECK(tr.t.norm() < 1e-12);
  CHECK(tr.q.angularDistance(Quat::Identity()) < 1e-12);
}

TEST_CASE("run command") {
  const fs::path root = fresh_dir("sloam_test_cli_run");
  std::ostringstream log;
  REQUIRE(cmd_synth(tiny_scene(5), root.string(), "00", log) == 0);

  RunConfig base;
  base.data_root = root.string();
  base.sequence = "00";

  SECTION("produces one pose per kept frame, starting at the identity") {
    auto cfg = base;
    cfg.output_dir = (root / "out_a").string();
    REQUIRE(cmd_run(cfg, log) == 0);

    const auto poses = read_poses((root / "out_a" / "00.txt").string());
    REQUIRE(poses.size() == 5);
    CHECK(poses[0].t.norm() < 1e-12);
    CHECK(poses[0].q.angularDistance(Quat::Identity()) < 1e-12);

    const std::string timing =
        testutil::read_file((root / "out_a" / "timing_00.csv").string());
    CHECK(timing.find("frame,seconds,matches,inliers") == 0);
    CHECK(std::count(timing.begin(), timing.end(), '\n') == 6);
  }

  SECTION("is deterministic across repeated runs") {
    auto cfg = base;
    cfg.output_dir = (root / "out_b1").string();
    REQUIRE(cmd_run(cfg, log) == 0);
    cfg.output_dir = (root / "out_b2").string();
    REQUIRE(cmd_run(cfg, log) == 0);

    const auto first = testutil::read_file((root / "out_b1" / "00.txt").string());
    const auto second = testutil::read_file((root / "out_b2" / "00.txt").string());
    REQUIRE(first.size() > 100);
    CHECK(first == second);
  }

  SECTION("ablation switches still complete") {
    auto cfg = base;
    cfg.use_semantics = false;
    cfg.use_orme = false;
    cfg.scan_to_map = false;
    cfg.output_dir = (root / "out_c").string();
    REQUIRE(cmd_run(cfg, log) == 0);
    CHECK(read_poses((root / "out_c" / "00.txt").string()).size() == 5);
  }

  SECTION("skip keeps every n+1-th frame") {
    auto cfg = base;
    cfg.skip = 1;
    cfg.output_dir = (root / "out_d").string();
    REQUIRE(cmd_run(cfg, log) == 0);
    CHECK(read_poses((root / "out_d" / "00.txt").string()).size() == 3);
  }

  SECTION("map export writes a PLY file") {
    auto cfg = base;
    cfg.export_map = true;
    cfg.max_frames = 2;
    cfg.output_dir = (root / "out_e").string();
    REQUIRE(cmd_run(cfg, log) == 0);
    CHECK(read_poses((root / "out_e" / "00.txt").string()).size() == 2);
    const std::string ply =
        testutil::read_file((root / "out_e" / "map_00.ply").string());
    CHECK(ply.find("ply") == 0);
    CHECK(ply.find("end_header") != std::string::npos);
  }

  SECTION("missing dataset is an I/O error") {
    auto cfg = base;
    cfg.sequence = "99";
    CHECK_THROWS_AS(cmd_run(cfg, log), IoError);
    cfg.data_root.clear();
    CHECK_THROWS_AS(cmd_run(cfg, log), IoError);
  }

  SECTION("the data root can come from the environment") {
    setenv("SLOAM_DATA_ROOT", root.string().c_str(), 1);
    const fs::path out = root / "out_env";
    REQUIRE(run_cli({"run", "--sequence", "00", "--output", out.string()}) == 0);
    unsetenv("SLOAM_DATA_ROOT");
    CHECK(read_poses((out / "00.txt").string()).size() == 5);
  }

  SECTION("options load from a config file") {
    const fs::path cfg_path = root / "run.ini";
    {
      std::ofstream ini(cfg_path);
      ini << "skip = 1\n";
      ini << "max-frames = 2\n";
      ini << "use-semantics = false\n";
    }
    const fs::path out = root / "out_ini";
    REQUIRE(run_cli({"run", "--data-root", root.string(), "--sequence", "00",
                     "--output", out.string(), "--config",
                     cfg_path.string()}) == 0);
    CHECK(read_poses((out / "00.txt").string()).size() == 2);
  }
}

TEST_CASE("eval command") {
  const fs::path root = fresh_dir("sloam_test_cli_eval");
  const auto gt = straight_poses(201, 0.5);  // 100 m
  const auto est = straight_poses(201, 0.505);
  write_poses((root / "gt.txt").string(), gt);
  write_poses((root / "est.txt").string(), est);

  EvalConfig cfg;
  cfg.gt_path = (root / "gt.txt").string();
  cfg.est_path = (root / "est.txt").string();
  cfg.metric.lengths = {50.0};
  cfg.metric.start_stride = 10;

  SECTION("a perfect estimate scores zero") {
    cfg.est_path = cfg.gt_path;
    std::ostringstream out;
    REQUIRE(cmd_eval(cfg, out) == 0);
    CHECK(out.str().find("0.0000") != std::string::npos);
  }

  SECTION("a one percent scale error scores one percent") {
    std::ostringstream out;
    cfg.csv_path = (root / "report.csv").string();
    REQUIRE(cmd_eval(cfg, out) == 0);
    CHECK(out.str().find("1.0000") != std::string::npos);

    const std::string csv = testutil::read_file(cfg.csv_path);
    REQUIRE(csv.find("sequence,segments,") == 0);
    const auto line = csv.substr(csv.find('\n') + 1);
    double trans = -1.0, rot = -1.0;
    std::size_t segments = 0;
    char name[64] = {0};
    REQUIRE(std::sscanf(line.c_str(), "%63[^,],%zu,%lf,%lf", name, &segments,
                        &trans, &rot) == 4);
    CHECK(std::string(name) == "est");
    CHECK(segments > 5);
    CHECK(trans == Catch::Approx(1.0).margin(1e-6));
    CHECK(rot == Catch::Approx(0.0).margin(1e-9));
  }

  SECTION("an identity calibration changes nothing") {
    std::ostringstream plain, conjugated;
    REQUIRE(cmd_eval(cfg, plain) == 0);
    {
      std::ofstream calib(root / "calib.txt");
      calib << "Tr: 1 0 0 0 0 1 0 0 0 0 1 0\n";
    }
    cfg.calib_path = (root / "calib.txt").string();
    REQUIRE(cmd_eval(cfg, conjugated) == 0);
    CHECK(plain.str() == conjugated.str());
  }

  SECTION("mismatched trajectory lengths are an error") {
    write_poses((root / "short.txt").string(), straight_poses(200, 0.505));
    cfg.est_path = (root / "short.txt").string();
    std::ostringstream out;
    CHECK_THROWS_AS(cmd_eval(cfg, out), EvaluationError);
  }
}

TEST_CASE("plot command") {
  const fs::path root = fresh_dir("sloam_test_cli_plot");
  write_poses((root / "a.txt").string(), straight_poses(50, 1.0));
  write_poses((root / "b.txt").string(), straight_poses(50, 1.01));

  std::ostringstream log;
  const std::string svg_one = (root / "one.svg").string();
  REQUIRE(cmd_plot({(root / "a.txt").string()}, svg_one, "", PlotConfig{},
                   log) == 0);
  const std::string one = testutil::read_file(svg_one);
  CHECK(testutil::xml_well_formed(one));
  CHECK(std::count(one.begin(), one.end(), '\n') > 2);
  REQUIRE(one.find("<polyline") != std::string::npos);
  CHECK(one.find("<polyline", one.find("<polyline") + 1) == std::string::npos);

  const std::string svg_two = (root / "two.svg").string();
  const std::string csv_two = (root / "two.csv").string();
  REQUIRE(cmd_plot({(root / "a.txt").string(), (root / "b.txt").string()},
                   svg_two, csv_two, PlotConfig{}, log) == 0);
  const std::string two = testutil::read_file(svg_two);
  CHECK(testutil::xml_well_formed(two));
  const auto first_poly = two.find("<polyline");
  REQUIRE(first_poly != std::string::npos);
  CHECK(two.find("<polyline", first_poly + 1) != std::string::npos);

  const std::string csv = testutil::read_file(csv_two);
  CHECK(csv.find("a") != std::string::npos);
  CHECK(csv.find("b") != std::string::npos);
}
