#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "traffic/config.hpp"
#include "traffic/detect.hpp"
#include "traffic/sink.hpp"
#include "traffic/video_io.hpp"

using namespace traffic;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("config_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
  std::string file(const std::string& name, const std::string& content) const {
    std::string p = (path / name).string();
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool any_problem_contains(const ConfigError& e, const std::string& needle) {
  for (const auto& p : e.problems())
    if (p.find(needle) != std::string::npos) return true;
  return false;
}

// Small moving-actor clip plus a detections file derived from its truth.
struct Fixture {
  TempDir dir;
  ScenePaths paths;
  std::size_t frame_count;

  Fixture() {
    SceneSpec spec;
    spec.width = 32;
    spec.height = 24;
    spec.frame_count = 12;
    spec.seed = 5;
    ActorSpec a;
    a.width = 8;
    a.height = 6;
    a.waypoints = {Waypoint{Vec2{24, 12}, 2.0, 0}, Waypoint{Vec2{6, 12}, 2.0, 0}};
    spec.actors.push_back(a);
    Scene scene = generate(spec);
    frame_count = scene.frames.size();
    paths = save_scene(scene, dir.str() + "/scene");

    std::map<std::int64_t, std::vector<Detection>> dets;
    for (const GroundTruthBox& t : scene.truth) {
      dets[t.frame_seq].push_back(
          Detection{t.frame_seq, t.bbox, t.class_label, 1.0, 1.0, std::nullopt});
    }
    save_detections_file(dir.str() + "/dets.jsonl", dets);
  }

  std::string video() const { return paths.video; }
  std::string dets() const { return dir.str() + "/dets.jsonl"; }
};

int run_cmd(const std::string& cmd) {
  int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("a full run config document populates every section") {
  std::string doc = R"({
    "camera_id": "cam-9",
    "input": {"path": "in.y4m", "format": "y4m"},
    "output_dir": "artifacts",
    "annotated_video": true,
    "queue_capacity": 4,
    "detector": {"kind": "blob", "min_area": 30, "alpha": 0.05, "k": 3.5},
    "flow": {"enabled": true, "window": 9, "pyramid_levels": 2, "min_support": 2},
    "zones": {
      "rects": [{"zone_id": 1, "x_min": 0, "y_min": 0, "x_max": 32, "y_max": 24}],
      "metas": [{"zone_id": 1, "surface": "ROAD", "allowed_direction": [1, 0]}]
    },
    "behaviors": {"enabled": true, "persist_frames": 4, "stop_frames": 8},
    "render": {"workers": 2}
  })";
  RunConfig cfg = parse_run_config(doc, "run.json");
  CHECK(cfg.camera_id == "cam-9");
  CHECK(cfg.input_path == "in.y4m");
  CHECK(cfg.input_format == "y4m");
  CHECK(cfg.output_dir == "artifacts");
  CHECK(cfg.annotated_video);
  CHECK(cfg.queue_capacity == 4);
  CHECK(cfg.detector.kind == DetectorKind::kBlob);
  CHECK(cfg.detector.min_area == 30);
  CHECK(cfg.detector.alpha == doctest::Approx(0.05));
  CHECK(cfg.detector.k == doctest::Approx(3.5));
  CHECK(cfg.flow.enabled);
  CHECK(cfg.flow.params.window == 9);
  CHECK(cfg.flow.params.pyramid_levels == 2);
  CHECK(cfg.flow.min_support == 2);
  REQUIRE(cfg.zones.enabled);
  REQUIRE(cfg.zones.rects.size() == 1u);
  CHECK(cfg.zones.rects[0].zone_id == 1);
  REQUIRE(cfg.zones.metas.size() == 1u);
  CHECK(cfg.zones.metas[0].surface == Surface::ROAD);
  REQUIRE(cfg.zones.metas[0].allowed_direction.has_value());
  CHECK(cfg.behaviors.enabled);
  CHECK(cfg.behaviors.params.persist_frames == 4);
  CHECK(cfg.behaviors.params.stop_frames == 8);
  CHECK(cfg.render_workers == 2);
}

TEST_CASE("parsing reports every problem in one error") {
  std::string doc = R"({
    "camera": "typo",
    "queue_capacity": "many",
    "detector": {"kind": "yolo", "kindd": 1},
    "flow": {"window": "wide"}
  })";
  try {
    parse_run_config(doc, "run.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.problems().size() == 5u);
    CHECK(any_problem_contains(e, "unknown key \"camera\""));
    CHECK(any_problem_contains(e, "queue_capacity must be an integer"));
    CHECK(any_problem_contains(e, "detector.kind must be"));
    CHECK(any_problem_contains(e, "detector: unknown key \"kindd\""));
    CHECK(any_problem_contains(e, "flow.window must be an integer"));
    CHECK(std::string(e.what()).find("5 problems") != std::string::npos);
  }
}

TEST_CASE("non-json configs fail with the origin in the message") {
  CHECK_THROWS_AS(parse_run_config("not json", "broken.json"), ConfigError);
  try {
    parse_run_config("[1, 2]", "broken.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "broken.json"));
  }
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.json"), ConfigError);
}

TEST_CASE("validation names every missing file at once") {
  RunConfig cfg;
  cfg.input_path = "/missing/input.y4m";
  cfg.detector.kind = DetectorKind::kFile;
  cfg.detector.path = "/missing/dets.jsonl";
  cfg.zones.enabled = true;
  cfg.zones.raster_path = "/missing/zones.pgm";
  cfg.zones.meta_path = "/missing/zones.json";
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "/missing/input.y4m"));
    CHECK(any_problem_contains(e, "/missing/dets.jsonl"));
    CHECK(any_problem_contains(e, "/missing/zones.pgm"));
    CHECK(any_problem_contains(e, "/missing/zones.json"));
  }
}

TEST_CASE("stateful stages must keep a single worker") {
  Fixture fx;
  RunConfig cfg;
  cfg.input_path = fx.video();
  cfg.detector.kind = DetectorKind::kBlob;
  cfg.detector.workers = 2;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "single-worker"));
  }

  // the replay detector holds no state, so extra workers are fine
  cfg.detector.kind = DetectorKind::kFile;
  cfg.detector.path = fx.dets();
  cfg.detector.workers = 4;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("stage dependencies are part of validation") {
  Fixture fx;
  RunConfig cfg;
  cfg.input_path = fx.video();
  cfg.flow.enabled = true;
  cfg.behaviors.enabled = true;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "flow requires a detector"));
    CHECK(any_problem_contains(e, "behaviors require zones"));
  }
}

TEST_CASE("zone rects rasterize in declaration order and clip to the frame") {
  std::vector<ZoneMeta> metas;
  ZoneMeta road;
  road.zone_id = 1;
  road.surface = Surface::ROAD;
  metas.push_back(road);
  ZoneMeta walk;
  walk.zone_id = 2;
  walk.surface = Surface::SIDEWALK;
  metas.push_back(walk);

  std::vector<ZoneRect> rects{{1, 0, 0, 8, 6}, {2, 4, -3, 100, 100}};
  ZoneMap zm = rasterize_zone_rects(rects, metas, 8, 6);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 8; ++x) {
      int want = x >= 4 ? 2 : 1;  // the later rect wins where they overlap
      CHECK((*zm.raster)[static_cast<std::size_t>(y) * 8 + x] == want);
    }
  }

  CHECK_THROWS_AS(rasterize_zone_rects({{0, 0, 0, 4, 4}}, metas, 8, 6),
                  std::invalid_argument);
  CHECK_THROWS_AS(rasterize_zone_rects(rects, metas, 0, 6), std::invalid_argument);

  // inline zones are checked without touching the filesystem
  RunConfig cfg;
  cfg.input_path = "/missing/input.y4m";
  cfg.zones.enabled = true;
  cfg.zones.rects = {{3, 0, 0, 4, 4}, {1, 5, 5, 5, 9}};
  cfg.zones.metas = metas;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "zone_id 3 has no metadata entry"));
    CHECK(any_problem_contains(e, "requires x_min < x_max"));
  }
}

TEST_CASE("zones config rejects mixing files with inline rects") {
  RunConfig cfg;
  cfg.input_path = "/missing/input.y4m";
  cfg.zones.enabled = true;
  cfg.zones.raster_path = "zones.pgm";
  cfg.zones.rects = {{1, 0, 0, 4, 4}};
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "not both"));
  }

  cfg.zones.raster_path.clear();
  cfg.zones.rects.clear();
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "raster+meta files or inline rects+metas"));
  }
}

TEST_CASE("scene spec documents parse into a generator spec") {
  std::string doc = R"({
    "width": 48, "height": 32, "frame_count": 20, "fps": 10,
    "background_gray": 80, "noise_sigma": 1.5, "seed": 11,
    "actors": [{
      "class_label": "motorcycle", "width": 10, "height": 8,
      "spawn_frame": 2, "base_gray": 200,
      "waypoints": [
        {"pos": [10, 16], "speed": 3.0},
        {"pos": [38, 16], "speed": 3.0, "dwell": 4}
      ]
    }],
    "zones": {
      "rects": [{"zone_id": 1, "x_min": 0, "y_min": 0, "x_max": 48, "y_max": 32}],
      "metas": [{"zone_id": 1, "surface": "ROAD", "allowed_direction": [1, 0]}]
    },
    "behavior": {"persist_frames": 3, "stop_frames": 5}
  })";
  SceneSpec spec = parse_scene_spec(doc, "scene.json");
  CHECK(spec.width == 48);
  CHECK(spec.height == 32);
  CHECK(spec.frame_count == 20);
  CHECK(spec.fps == 10);
  CHECK(spec.background_gray == 80);
  CHECK(spec.noise_sigma == doctest::Approx(1.5));
  CHECK(spec.seed == 11u);
  REQUIRE(spec.actors.size() == 1u);
  CHECK(spec.actors[0].class_label == "motorcycle");
  CHECK(spec.actors[0].spawn_frame == 2);
  REQUIRE(spec.actors[0].waypoints.size() == 2u);
  CHECK(spec.actors[0].waypoints[1].dwell == 4);
  REQUIRE(spec.zones.has_value());
  CHECK((*spec.zones->raster)[0] == 1);
  CHECK(spec.behavior.persist_frames == 3);
  CHECK(spec.behavior.stop_frames == 5);
}

TEST_CASE("scene spec errors carry the origin and the offending path") {
  std::string doc = R"({
    "width": 48, "height": 32,
    "actors": [{
      "hieght": 8,
      "waypoints": [{"pos": [1]}]
    }]
  })";
  try {
    parse_scene_spec(doc, "scene.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "scene.json: actors[0]: unknown key \"hieght\""));
    CHECK(any_problem_contains(e, "actors[0].waypoints[0].pos must be [x, y]"));
  }

  // structurally fine but semantically invalid
  try {
    parse_scene_spec(R"({"width": 0})", "scene.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "scene.json"));
  }
}

TEST_CASE("eval config documents parse grids and class mappings") {
  std::string doc = R"({
    "iou_threshold": 0.3,
    "objectness_grid": [0.25, 0.5, 0.75],
    "label_grid": [0.5],
    "class_mapping": {"tuk-tuk": "motorcycle"}
  })";
  EvalConfig cfg = parse_eval_config(doc, "eval.json");
  CHECK(cfg.iou_threshold == doctest::Approx(0.3));
  CHECK(cfg.objectness_grid == std::vector<double>{0.25, 0.5, 0.75});
  CHECK(cfg.label_grid == std::vector<double>{0.5});
  CHECK(cfg.mapped("tuk-tuk") == "motorcycle");

  try {
    parse_eval_config(R"({"objectness_grid": [0.9, 0.1]})", "eval.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(any_problem_contains(e, "eval.json"));
  }
  CHECK_THROWS_AS(parse_eval_config(R"({"objectness_grid": []})", "eval.json"),
                  ConfigError);
  CHECK_THROWS_AS(parse_eval_config(R"({"class_mapping": {"a": 1}})", "eval.json"),
                  ConfigError);
}

TEST_CASE("stateless worker count does not change a run's logs") {
  Fixture fx;
  auto run_with_workers = [&](int workers, const std::string& out) {
    RunConfig cfg;
    cfg.camera_id = "cam";
    cfg.input_path = fx.video();
    cfg.output_dir = out;
    cfg.queue_capacity = 4;
    cfg.detector.kind = DetectorKind::kFile;
    cfg.detector.path = fx.dets();
    cfg.detector.workers = workers;
    RunStats stats = run_configured_pipeline(cfg);
    CHECK(stats.frames_out == static_cast<std::int64_t>(fx.frame_count));
    return log_paths(out);
  };

  LogPaths one = run_with_workers(1, fx.dir.str() + "/run1");
  LogPaths four = run_with_workers(4, fx.dir.str() + "/run4");
  CHECK_FALSE(slurp(one.detections).empty());
  CHECK(slurp(one.detections) == slurp(four.detections));
  CHECK(slurp(one.motions) == slurp(four.motions));
  CHECK(slurp(one.events) == slurp(four.events));
}

TEST_CASE("a configured run can emit annotated video alongside the logs") {
  Fixture fx;
  RunConfig cfg;
  cfg.input_path = fx.video();
  cfg.output_dir = fx.dir.str() + "/annotated_run";
  cfg.detector.kind = DetectorKind::kFile;
  cfg.detector.path = fx.dets();
  cfg.annotated_video = true;
  cfg.render_workers = 2;
  RunStats stats = run_configured_pipeline(cfg);
  CHECK(stats.frames_out == static_cast<std::int64_t>(fx.frame_count));

  std::ifstream in(cfg.output_dir + "/annotated.y4m", std::ios::binary);
  REQUIRE(in);
  Y4mReader reader(in);
  CHECK(reader.header().width == 32);
  CHECK(reader.header().height == 24);
  std::size_t frames = 0;
  while (reader.next()) ++frames;
  CHECK(frames == fx.frame_count);
}

TEST_CASE("the binary exits with 2 and names the path on config errors") {
  Fixture fx;
  std::string cfg = fx.dir.file("run.json", R"({
    "input": {"path": ")" + fx.video() + R"("},
    "output_dir": ")" + fx.dir.str() + R"(/out",
    "zones": {"raster": "/missing/zones.pgm", "meta": "/missing/zones.json"}
  })");
  std::string err = fx.dir.str() + "/err.txt";
  int code = run_cmd(std::string(TRAFFICPIPE_BIN) + " run -c " + cfg + " 2>" + err);
  CHECK(code == 2);
  std::string message = slurp(err);
  CHECK(message.find("/missing/zones.pgm") != std::string::npos);
}

TEST_CASE("TRAFFICPIPE_OUTPUT_DIR overrides the configured output dir") {
  Fixture fx;
  std::string cfg = fx.dir.file("run.json", R"({
    "input": {"path": ")" + fx.video() + R"("},
    "output_dir": ")" + fx.dir.str() + R"(/configured",
    "detector": {"kind": "file", "path": ")" + fx.dets() + R"("}
  })");
  std::string redirected = fx.dir.str() + "/redirected";
  int code = run_cmd("TRAFFICPIPE_OUTPUT_DIR=" + redirected + " " + TRAFFICPIPE_BIN +
                     " run -c " + cfg + " >/dev/null 2>&1");
  CHECK(code == 0);
  CHECK(std::filesystem::exists(redirected + "/detections.jsonl"));
  CHECK_FALSE(std::filesystem::exists(fx.dir.str() + "/configured/detections.jsonl"));
}

TEST_CASE("synth and report subcommands write their artifacts") {
  TempDir tmp;
  std::string spec = tmp.file("scene.json", R"({
    "width": 32, "height": 24, "frame_count": 6, "seed": 3,
    "actors": [{"width": 8, "height": 6,
                "waypoints": [{"pos": [16, 12], "speed": 2.0},
                              {"pos": [8, 12], "speed": 2.0}]}]
  })");
  std::string fixture = tmp.str() + "/fixture";
  int code = run_cmd(std::string(TRAFFICPIPE_BIN) + " synth --spec " + spec + " --out " +
                     fixture + " >/dev/null 2>&1");
  CHECK(code == 0);
  CHECK(std::filesystem::exists(fixture));
  bool has_video = false;
  for (const auto& entry : std::filesystem::directory_iterator(fixture)) {
    if (entry.path().extension() == ".y4m") has_video = true;
  }
  CHECK(has_video);

  // report over logs with no content: header-only CSVs
  std::string logs = tmp.str() + "/logs";
  std::filesystem::create_directories(logs);
  for (const char* name : {"detections.jsonl", "motions.jsonl", "events.jsonl"})
    tmp.file(std::string("logs/") + name, "");
  std::string summary = tmp.str() + "/summary";
  code = run_cmd(std::string(TRAFFICPIPE_BIN) + " report --logs " + logs + " --out " +
                 summary + " >/dev/null 2>&1");
  CHECK(code == 0);
  CHECK(slurp(summary + "/counts.csv") ==
        "camera_id,bucket,bucket_start_s,class_label,count,mean_direction_deg,mean_speed_px\n");
  CHECK(slurp(summary + "/event_counts.csv") ==
        "camera_id,bucket,bucket_start_s,kind,count\n");
}

TEST_CASE("evaluate writes one confusion file per grid cell") {
  Fixture fx;
  std::string eval_cfg = fx.dir.file("eval.json", R"({
    "objectness_grid": [0.3, 0.5, 0.7],
    "label_grid": [0.2, 0.5, 0.8]
  })");
  std::string out = fx.dir.str() + "/report";
  int code = run_cmd(std::string(TRAFFICPIPE_BIN) + " evaluate --detections " +
                     fx.dets() + " --truth " + fx.paths.truth_xml + " --config " +
                     eval_cfg + " --out " + out + " >/dev/null 2>&1");
  CHECK(code == 0);

  int confusion_files = 0;
  bool has_pr_csv = false, has_summary = false;
  for (const auto& entry : std::filesystem::directory_iterator(out)) {
    std::string name = entry.path().filename().string();
    if (name.rfind("confusion_", 0) == 0) ++confusion_files;
    if (name == "pr_car.csv") has_pr_csv = true;
    if (name == "summary.txt") has_summary = true;
  }
  CHECK(confusion_files == 9);
  CHECK(has_pr_csv);
  CHECK(has_summary);

  // perfect detections score a perfect operating point
  std::string pr = slurp(out + "/pr_car.csv");
  CHECK(pr.find("1.000000,1.000000") != std::string::npos);
}
