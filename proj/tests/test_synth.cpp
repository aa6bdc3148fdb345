#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "traffic/cvat.hpp"
#include "traffic/eval.hpp"
#include "traffic/synth.hpp"
#include "traffic/video_io.hpp"
#include "traffic/zones.hpp"

using namespace traffic;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("synth_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

ZoneMap road_everywhere(int w, int h, Vec2 allowed) {
  ZoneMeta m;
  m.zone_id = 1;
  m.surface = Surface::ROAD;
  m.allowed_direction = allowed;
  return make_zone_map(
      std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1), w, h, {m});
}

}  // namespace

TEST_CASE("a linear trajectory yields one truth box per frame with its displacement") {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.frame_count = 10;
  ActorSpec a;
  a.width = 10;
  a.height = 8;
  // nine steps of exactly (2,1) per frame
  a.waypoints = {Waypoint{Vec2{10, 10}, std::sqrt(5.0), 0}, Waypoint{Vec2{28, 19}, 1.0, 0}};
  spec.actors.push_back(a);

  Scene scene = generate(spec);
  REQUIRE(scene.truth.size() == 10u);
  CHECK_FALSE(scene.truth[0].true_motion.has_value());  // no prior frame
  for (std::size_t i = 1; i < scene.truth.size(); ++i) {
    REQUIRE(scene.truth[i].true_motion.has_value());
    CHECK(scene.truth[i].true_motion->x == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(scene.truth[i].true_motion->y == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(scene.truth[i].bbox.x_min() ==
          doctest::Approx(scene.truth[i - 1].bbox.x_min() + 2.0));
    CHECK(scene.truth[i].bbox.y_min() ==
          doctest::Approx(scene.truth[i - 1].bbox.y_min() + 1.0));
  }
  CHECK(scene.truth[0].bbox == BBox(5, 6, 15, 14));  // centered on (10,10)
}

TEST_CASE("driving against the allowed direction is replayed into one event") {
  SceneSpec spec;
  spec.width = 64;
  spec.height = 48;
  spec.frame_count = 12;
  spec.zones = road_everywhere(64, 48, Vec2{1.0, 0.0});
  ActorSpec a;
  a.waypoints = {Waypoint{Vec2{50, 24}, 3.0, 0}, Waypoint{Vec2{14, 24}, 1.0, 0}};
  spec.actors.push_back(a);

  Scene scene = generate(spec);
  REQUIRE(scene.expected_events.size() == 1u);
  const BehaviorEvent& ev = scene.expected_events[0];
  CHECK(ev.kind == BehaviorKind::WRONG_WAY);
  CHECK(ev.zone_id == 1);
  CHECK(ev.first_seq == 1);  // motion exists from the second frame
  CHECK(ev.last_seq == 5);
  CHECK(ev.evidence.at("mean_deviation_deg") == doctest::Approx(180.0));
}

TEST_CASE("generation is deterministic for a fixed seed") {
  SceneSpec spec;
  spec.frame_count = 6;
  spec.noise_sigma = 2.0;
  ActorSpec a;
  a.waypoints = {Waypoint{Vec2{20, 20}, 2.0, 0}, Waypoint{Vec2{40, 28}, 1.0, 0}};
  spec.actors.push_back(a);

  Scene s1 = generate(spec);
  Scene s2 = generate(spec);
  REQUIRE(s1.frames.size() == s2.frames.size());
  for (std::size_t i = 0; i < s1.frames.size(); ++i) {
    CHECK(std::equal(s1.frames[i].data().begin(), s1.frames[i].data().end(),
                     s2.frames[i].data().begin()));
  }
  REQUIRE(s1.truth.size() == s2.truth.size());
  for (std::size_t i = 0; i < s1.truth.size(); ++i) {
    CHECK(s1.truth[i].bbox == s2.truth[i].bbox);
  }

  SceneSpec other = spec;
  other.seed = 2;
  Scene s3 = generate(other);
  bool any_diff = false;
  for (std::size_t i = 0; i < s1.frames.size() && !any_diff; ++i)
    any_diff = !std::equal(s1.frames[i].data().begin(), s1.frames[i].data().end(),
                           s3.frames[i].data().begin());
  CHECK(any_diff);  // the seed actually reaches the pixels
}

TEST_CASE("actors that cannot fit are rejected") {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 24;
  ActorSpec a;
  a.width = 40;  // wider than the frame
  a.waypoints = {Waypoint{Vec2{16, 12}, 1.0, 0}};
  spec.actors.push_back(a);
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);

  spec.actors[0].width = 12;
  spec.actors[0].waypoints = {Waypoint{Vec2{100, 12}, 1.0, 0}};  // spawns off-frame
  CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("partially visible actors produce no truth boxes") {
  SceneSpec spec;
  spec.width = 48;
  spec.height = 32;
  spec.frame_count = 20;
  ActorSpec a;
  a.width = 12;
  a.height = 10;
  // walks off the right edge
  a.waypoints = {Waypoint{Vec2{30, 16}, 4.0, 0}, Waypoint{Vec2{90, 16}, 1.0, 0}};
  spec.actors.push_back(a);
  Scene scene = generate(spec);
  for (const auto& g : scene.truth) {
    CHECK(g.bbox.x_min() >= 0.0);
    CHECK(g.bbox.x_max() <= 48.0);
  }
  CHECK(scene.truth.size() < 20u);
}

TEST_CASE("saved scenes round trip through the format parsers") {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 24;
  spec.frame_count = 8;
  spec.zones = road_everywhere(32, 24, Vec2{1.0, 0.0});
  ActorSpec a;
  a.width = 8;
  a.height = 6;
  a.waypoints = {Waypoint{Vec2{20, 12}, 3.0, 0}, Waypoint{Vec2{8, 12}, 1.0, 0}};
  spec.actors.push_back(a);
  // only 4 moving frames fit in this clip, so shorten the episode gate
  spec.behavior.persist_frames = 3;
  Scene scene = generate(spec);
  REQUIRE_FALSE(scene.truth.empty());
  REQUIRE_FALSE(scene.expected_events.empty());

  TempDir tmp;
  ScenePaths paths = save_scene(scene, tmp.path.string());

  // video: luma plane preserves the gray frames exactly
  std::ifstream vin(paths.video, std::ios::binary);
  Y4mReader reader(vin);
  CHECK(reader.header().width == 32);
  for (const Frame& want : scene.frames) {
    auto got = reader.next();
    REQUIRE(got.has_value());
    auto luma = got->luma();
    CHECK(std::equal(want.data().begin(), want.data().end(), luma.begin()));
  }
  CHECK_FALSE(reader.next().has_value());

  // truth boxes and motions
  auto boxes = parse_cvat_file(paths.truth_xml);
  REQUIRE(boxes.size() == scene.truth.size());
  load_truth_motion_file(boxes, paths.motion_json);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    CHECK(boxes[i].frame_seq == scene.truth[i].frame_seq);
    CHECK(boxes[i].bbox == scene.truth[i].bbox);
    CHECK(boxes[i].class_label == scene.truth[i].class_label);
    CHECK(boxes[i].track_id == scene.truth[i].track_id);
    CHECK(boxes[i].true_motion.has_value() == scene.truth[i].true_motion.has_value());
    if (boxes[i].true_motion) {
      CHECK(boxes[i].true_motion->x == doctest::Approx(scene.truth[i].true_motion->x));
      CHECK(boxes[i].true_motion->y == doctest::Approx(scene.truth[i].true_motion->y));
    }
  }

  // zones: loadable and byte-identical raster
  ZoneMap zback = load_zone_map(paths.zone_raster, paths.zone_meta, 32, 24);
  CHECK(*zback.raster == *scene.spec.zones->raster);

  // expected events: one line each
  std::ifstream ein(paths.expected_events);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(ein, line))
    if (!line.empty()) ++lines;
  CHECK(lines == scene.expected_events.size());
}

TEST_CASE("an empty actor list gives pure background and empty truth") {
  SceneSpec spec;
  spec.width = 32;
  spec.height = 24;
  spec.frame_count = 4;
  Scene scene = generate(spec);
  CHECK(scene.truth.empty());
  CHECK(scene.expected_events.empty());
  for (std::size_t i = 1; i < scene.frames.size(); ++i) {
    CHECK(std::equal(scene.frames[0].data().begin(), scene.frames[0].data().end(),
                     scene.frames[i].data().begin()));  // static background
  }

  TempDir tmp;
  ScenePaths paths = save_scene(scene, tmp.path.string());
  CHECK(parse_cvat_file(paths.truth_xml).empty());
  CHECK(paths.zone_raster.empty());
}

TEST_CASE("zero perturbation reproduces the truth with perfect scores") {
  SceneSpec spec;
  spec.frame_count = 10;
  ActorSpec a;
  a.waypoints = {Waypoint{Vec2{20, 20}, 2.0, 0}, Waypoint{Vec2{40, 20}, 1.0, 0}};
  spec.actors.push_back(a);
  Scene scene = generate(spec);

  auto dets = perturb_detections(scene.truth, spec.width, spec.height, PerturbParams{});
  std::size_t total = 0;
  for (const auto& [f, list] : dets) total += list.size();
  CHECK(total == scene.truth.size());

  EvalData data;
  data.detections = dets;
  data.truths = group_truths(scene.truth);
  EvalConfig cfg;
  for (const auto& pt : pr_curve(data, "car", cfg)) {
    CHECK(pt.precision == doctest::Approx(1.0));
    CHECK(pt.recall == doctest::Approx(1.0));
  }
}

TEST_CASE("the miss rate thins detections binomially") {
  // 1000 truth boxes across 100 frames
  std::vector<GroundTruthBox> truth;
  for (int f = 0; f < 100; ++f) {
    for (int i = 0; i < 10; ++i) {
      double x0 = 4.0 + 9.0 * i;
      truth.push_back(GroundTruthBox{f, BBox(x0, 10, x0 + 8, 18), "car", i, std::nullopt});
    }
  }
  PerturbParams params;
  params.miss_rate = 0.5;
  params.seed = 42;
  auto dets = perturb_detections(truth, 128, 48, params);
  std::size_t kept = 0;
  for (const auto& [f, list] : dets) kept += list.size();
  double recall = static_cast<double>(kept) / truth.size();
  CHECK(recall >= 0.45);
  CHECK(recall <= 0.55);
}

TEST_CASE("large jitter pushes matches below the iou threshold") {
  // one isolated 10x10 truth per frame so only self-matches are possible
  std::vector<GroundTruthBox> truth;
  for (int f = 0; f < 500; ++f)
    truth.push_back(GroundTruthBox{f, BBox(40, 30, 50, 40), "car", 0, std::nullopt});
  PerturbParams params;
  params.jitter_px = 20.0;
  params.seed = 7;
  auto dets = perturb_detections(truth, 128, 80, params);

  auto grouped = group_truths(truth);
  int tp = 0, total = 0;
  for (const auto& [f, tlist] : grouped) {
    auto it = dets.find(f);
    std::vector<Detection> dlist = it == dets.end() ? std::vector<Detection>{} : it->second;
    MatchSet m = match_frame(dlist, tlist, 0.25);
    tp += static_cast<int>(m.pairs.size());
    total += static_cast<int>(tlist.size());
  }
  // shifts are uniform on [-20,20] per axis; IOU >= 0.25 needs
  // (10-|dx|)(10-|dy|) >= 40, whose probability is (60 - 40*ln 2.5)/400
  double expected = (60.0 - 40.0 * std::log(2.5)) / 400.0;
  double recall = static_cast<double>(tp) / total;
  CHECK(recall <= 0.12);
  CHECK(std::abs(recall - expected) <= 0.04);
}

TEST_CASE("injected false positives stay clear of every truth box") {
  std::vector<GroundTruthBox> truth;
  for (int f = 0; f < 50; ++f)
    truth.push_back(GroundTruthBox{f, BBox(30, 20, 50, 36), "car", 0, std::nullopt});
  PerturbParams params;
  params.fp_rate = 0.4;
  params.seed = 11;
  auto dets = perturb_detections(truth, 96, 64, params);

  std::size_t total = 0, fps = 0;
  for (const auto& [f, list] : dets) {
    for (const auto& d : list) {
      ++total;
      bool is_fp = true;
      for (const auto& g : truth) {
        if (g.frame_seq != f) continue;
        double v = iou(d.bbox, g.bbox);
        if (v >= 0.999) is_fp = false;        // the surviving truth copy
        else CHECK(v < 0.05);                  // injected boxes never overlap
      }
      if (is_fp) ++fps;
    }
  }
  CHECK(total == 50u + fps);
  CHECK(fps > 0u);
}
