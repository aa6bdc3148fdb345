#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "traffic/behaviors.hpp"
#include "traffic/eval.hpp"
#include "traffic/flow.hpp"
#include "traffic/pipeline.hpp"
#include "traffic/synth.hpp"
#include "traffic/zones.hpp"

namespace traffic {

// Carries every problem found, not just the first; what() lists them all.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

enum class DetectorKind { kNone, kFile, kBlob };

struct DetectorConfig {
  DetectorKind kind = DetectorKind::kNone;
  std::string path;     // kFile: detections JSONL keyed by frame_seq
  int workers = 1;      // kFile only; the background model is single-worker
  int min_area = 20;    // kBlob
  double alpha = 0.02;  // kBlob
  double k = 4.0;       // kBlob
};

struct FlowConfig {
  bool enabled = false;
  FlowParams params;
  int min_support = 3;  // tracked points required inside a box
};

// Rasterized in declaration order (later rects overwrite earlier ones);
// edges follow the pixel-span convention and clip to the frame.
struct ZoneRect {
  int zone_id = 0;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

struct ZonesConfig {
  bool enabled = false;
  std::string raster_path;  // PGM, paired with meta_path
  std::string meta_path;
  std::vector<ZoneRect> rects;  // inline alternative, paired with metas
  std::vector<ZoneMeta> metas;

  bool inline_zones() const { return !rects.empty() || !metas.empty(); }
};

struct BehaviorConfig {
  bool enabled = false;
  BehaviorParams params;
};

struct RunConfig {
  std::string camera_id = "cam0";
  std::string input_path;
  std::string input_format = "y4m";
  std::string output_dir = "out";
  bool annotated_video = false;
  int queue_capacity = 8;
  int render_workers = 1;
  DetectorConfig detector;
  FlowConfig flow;
  ZonesConfig zones;
  BehaviorConfig behaviors;

  // Collects every problem (missing files, bad ranges, stage dependencies,
  // stateful stages with workers > 1) and throws ConfigError listing them.
  void validate() const;
};

// origin prefixes parse diagnostics (usually the file path).
RunConfig parse_run_config(const std::string& json_text, const std::string& origin);
RunConfig load_run_config(const std::string& path);

SceneSpec parse_scene_spec(const std::string& json_text, const std::string& origin);
SceneSpec load_scene_spec(const std::string& path);

EvalConfig parse_eval_config(const std::string& json_text, const std::string& origin);
EvalConfig load_eval_config(const std::string& path);

// Paints rects onto an id-0 canvas and validates against the metadata.
ZoneMap rasterize_zone_rects(const std::vector<ZoneRect>& rects,
                             std::vector<ZoneMeta> metas, int width, int height);

// Validates, assembles and runs the pipeline: y4m source, optional detector /
// flow / behavior stages, optional render stage + annotated video, JSONL log
// sink. Throws ConfigError before streaming starts, StageFailure for mid-run
// stage errors, FormatError for undecodable input.
RunStats run_configured_pipeline(const RunConfig& cfg);

}  // namespace traffic
