#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traffic/behaviors.hpp"
#include "traffic/frame.hpp"
#include "traffic/types.hpp"
#include "traffic/zones.hpp"

namespace traffic {

// Deterministic splitmix64-based generator. Self-contained so fixtures are
// bit-identical across standard libraries and platforms.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double uniform() { return (next() >> 11) * 0x1.0p-53; }  // [0,1)

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; two fresh uniforms per call, no cached spare.
  double gaussian(double sigma);
};

// Deterministic hash of integer lattice coordinates, for value-noise
// textures that stay put under any evaluation order.
std::uint64_t lattice_hash(std::int64_t x, std::int64_t y, std::uint64_t seed);

// Smooth value noise in [-1,1]; cell_size is the lattice spacing in px.
double value_noise(double x, double y, int cell_size, std::uint64_t seed);

struct Waypoint {
  Vec2 pos;            // actor center
  double speed = 2.0;  // px/frame toward the next waypoint
  int dwell = 0;       // frames to hold still here before moving on
};

struct ActorSpec {
  std::string class_label = "car";
  int width = 12;
  int height = 10;
  std::vector<Waypoint> waypoints;
  int spawn_frame = 0;
  int base_gray = 220;
  int texture_amp = 30;
  std::uint64_t texture_seed = 7;
};

struct SceneSpec {
  int width = 64;
  int height = 48;
  int frame_count = 50;
  int fps = 25;
  int background_gray = 96;
  bool textured_background = true;
  int background_amp = 20;
  double noise_sigma = 0.0;  // per-frame additive gaussian noise
  std::uint64_t seed = 1;
  std::vector<ActorSpec> actors;
  std::optional<ZoneMap> zones;
  BehaviorParams behavior;  // drives the expected-event replay

  void validate() const;
};

struct Scene {
  SceneSpec spec;
  std::vector<Frame> frames;  // GRAY8
  // truth boxes only for frames where the actor is fully visible;
  // true_motion is the displacement into the frame, absent on the first
  // visible frame of a run
  std::vector<GroundTruthBox> truth;
  std::vector<BehaviorEvent> expected_events;
};

// Renders textured actors along their trajectories and derives ground truth
// and expected events analytically from the exact trajectories.
Scene generate(const SceneSpec& spec);

struct ScenePaths {
  std::string video;
  std::string truth_xml;
  std::string motion_json;
  std::string expected_events;
  std::string zone_raster;  // empty when the scene has no zones
  std::string zone_meta;
};

// One JSON object per line: kind, first_seq, last_seq, class_label, zone_id,
// bbox, evidence. Deterministic given the events, so oracle comparisons can
// diff bytes.
void save_events_jsonl(const std::vector<BehaviorEvent>& events, std::ostream& out);
void save_events_jsonl_file(const std::vector<BehaviorEvent>& events,
                            const std::string& path);

// Writes video.y4m, truth.xml, motion.json, expected_events.jsonl and, when
// present, zones.pgm + zones.json into dir (created if needed).
ScenePaths save_scene(const Scene& scene, const std::string& dir);

enum class ConfModel {
  kConstantOne,  // every detection gets objectness 1
  kUniform,      // objectness uniform in [0.5, 1]
};

struct PerturbParams {
  double fp_rate = 0.0;
  double miss_rate = 0.0;
  double jitter_px = 0.0;
  ConfModel conf_model = ConfModel::kConstantOne;
  std::uint64_t seed = 1;
};

// Degrades ground truth into a detection set with closed-form expected
// metrics: recall ~ 1-miss_rate, precision ~ (1-miss)/(1-miss+fp). False
// positives are rejection-sampled away from every truth box (IOU < 0.05) so
// they can never match.
std::map<std::int64_t, std::vector<Detection>> perturb_detections(
    const std::vector<GroundTruthBox>& truth, int width, int height,
    const PerturbParams& params);

}  // namespace traffic
