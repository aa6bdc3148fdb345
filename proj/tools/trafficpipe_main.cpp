#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "traffic/config.hpp"
#include "traffic/cvat.hpp"
#include "traffic/detect.hpp"
#include "traffic/report.hpp"
#include "traffic/sink.hpp"
#include "traffic/synth.hpp"
#include "traffic/video_io.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitIo = 4;

void print_stats(const traffic::RunStats& st) {
  std::cout << "frames_in=" << st.frames_in << " frames_out=" << st.frames_out
            << " wall_ms=" << st.wall_ms << " peak_in_flight=" << st.peak_in_flight
            << '\n';
  for (const auto& s : st.stages) {
    std::cout << "stage " << s.name << ": busy_ms=" << s.busy_ms
              << " batches=" << s.batches << " skipped=" << s.skipped << '\n';
  }
  for (const auto& q : st.queues) {
    std::cout << "queue " << q.name << ": capacity=" << q.capacity
              << " high_water=" << q.high_water << '\n';
  }
  for (const auto& [stage, seq] : st.incidents) {
    std::cout << "incident: stage=" << stage << " seq=" << seq << '\n';
  }
}

struct RunOverrides {
  std::string output_dir;
  std::string camera;
  int workers = 0;
  bool annotated = false;
  bool no_annotated = false;
};

int cmd_run(const std::string& config_path, const RunOverrides& ov) {
  traffic::RunConfig cfg = traffic::load_run_config(config_path);
  if (const char* env = std::getenv("TRAFFICPIPE_OUTPUT_DIR")) cfg.output_dir = env;
  if (!ov.output_dir.empty()) cfg.output_dir = ov.output_dir;
  if (!ov.camera.empty()) cfg.camera_id = ov.camera;
  if (ov.workers > 0) {
    // stateless stages only; stateful ones keep their mandatory single worker
    if (cfg.detector.kind == traffic::DetectorKind::kFile) {
      cfg.detector.workers = ov.workers;
    }
    cfg.render_workers = ov.workers;
  }
  if (ov.annotated) cfg.annotated_video = true;
  if (ov.no_annotated) cfg.annotated_video = false;

  traffic::RunStats stats = traffic::run_configured_pipeline(cfg);
  print_stats(stats);
  std::cout << "logs: " << traffic::log_paths(cfg.output_dir).detections << '\n';
  return 0;
}

// Accepts either the plain detection-record JSONL or a run's detections.jsonl
// log (recognized by its det_index field).
std::map<std::int64_t, std::vector<traffic::Detection>> load_detections_any(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw traffic::FormatError("cannot open detections: " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  const bool log_schema = line.find("\"det_index\"") != std::string::npos;
  return log_schema ? traffic::load_detection_log(path)
                    : traffic::load_detections_file(path);
}

int cmd_evaluate(const std::string& dets_path, const std::string& truth_path,
                 const std::string& eval_cfg_path, const std::string& truth_motion_path,
                 const std::string& motions_path, double min_motion_magnitude,
                 const std::string& out_dir) {
  traffic::EvalData data;
  data.detections = load_detections_any(dets_path);

  std::vector<traffic::GroundTruthBox> truth = traffic::parse_cvat_file(truth_path);
  if (!truth_motion_path.empty()) {
    traffic::load_truth_motion_file(truth, truth_motion_path);
  }
  data.truths = traffic::group_truths(truth);

  traffic::EvalConfig cfg;
  if (!eval_cfg_path.empty()) cfg = traffic::load_eval_config(eval_cfg_path);

  traffic::EvalReport report;
  std::set<std::string> classes;
  for (const auto& [seq, boxes] : data.truths) {
    for (const auto& b : boxes) classes.insert(cfg.mapped(b.class_label));
  }
  for (const auto& cls : classes) {
    report.curves[cls] = traffic::pr_curve(data, cls, cfg);
  }
  report.matrices = traffic::confusion_grid(data, cfg);
  if (!motions_path.empty()) {
    report.angle = traffic::motion_error_stats(data, traffic::load_motion_log(motions_path),
                                               cfg, min_motion_magnitude);
  }

  for (const auto& p : traffic::write_eval_report(out_dir, report)) {
    std::cout << p << '\n';
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  traffic::SceneSpec spec = traffic::load_scene_spec(spec_path);
  traffic::Scene scene = traffic::generate(spec);
  traffic::ScenePaths paths = traffic::save_scene(scene, out_dir);
  std::cout << paths.video << '\n'
            << paths.truth_xml << '\n'
            << paths.motion_json << '\n'
            << paths.expected_events << '\n';
  if (!paths.zone_raster.empty()) {
    std::cout << paths.zone_raster << '\n' << paths.zone_meta << '\n';
  }
  return 0;
}

int cmd_report(const std::string& log_dir, double bucket_seconds, double fps,
               const std::string& out_dir) {
  traffic::Summary summary =
      traffic::summarize(traffic::log_paths(log_dir), bucket_seconds, fps);
  for (const auto& p : traffic::write_summary(summary, out_dir)) {
    std::cout << p << '\n';
  }
  if (summary.skipped_lines > 0) {
    std::cerr << "skipped " << summary.skipped_lines << " malformed log line(s)\n";
    for (const auto& r : summary.skipped_reasons) std::cerr << "  " << r << '\n';
  }
  return 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const traffic::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const traffic::StageFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming traffic-video analysis pipeline"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the pipeline described by a config file");
  std::string run_config;
  RunOverrides ov;
  run->add_option("-c,--config", run_config, "run configuration (JSON)")->required();
  run->add_option("--output-dir", ov.output_dir, "override output_dir");
  run->add_option("--camera", ov.camera, "override camera_id");
  run->add_option("--workers", ov.workers, "worker count for stateless stages");
  run->add_flag("--annotated", ov.annotated, "force annotated video on");
  run->add_flag("--no-annotated", ov.no_annotated, "force annotated video off");

  auto* evaluate = app.add_subcommand("evaluate", "score detections against ground truth");
  std::string ev_dets, ev_truth, ev_cfg, ev_truth_motion, ev_motions, ev_out;
  double ev_min_mag = 0.5;
  evaluate->add_option("--detections", ev_dets, "detections JSONL (records or run log)")
      ->required();
  evaluate->add_option("--truth", ev_truth, "ground-truth XML")->required();
  evaluate->add_option("--config", ev_cfg, "evaluation configuration (JSON)");
  evaluate->add_option("--truth-motion", ev_truth_motion, "truth motion JSON");
  evaluate->add_option("--motions", ev_motions, "motions JSONL from a run");
  evaluate->add_option("--min-motion-magnitude", ev_min_mag,
                       "exclude slower motion from angle error");
  evaluate->add_option("--out", ev_out, "report directory")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene fixture");
  std::string sy_spec, sy_out;
  synth->add_option("--spec", sy_spec, "scene specification (JSON)")->required();
  synth->add_option("--out", sy_out, "fixture directory")->required();

  auto* report = app.add_subcommand("report", "summarize run logs into count tables");
  std::string rp_logs, rp_out;
  double rp_bucket = 60.0, rp_fps = 25.0;
  report->add_option("--logs", rp_logs, "directory holding the run's JSONL logs")
      ->required();
  report->add_option("--bucket-seconds", rp_bucket, "bucket width in seconds");
  report->add_option("--fps", rp_fps, "stream frame rate used for bucketing");
  report->add_option("--out", rp_out, "summary directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return guarded([&] { return cmd_run(run_config, ov); });
  if (evaluate->parsed()) {
    return guarded([&] {
      return cmd_evaluate(ev_dets, ev_truth, ev_cfg, ev_truth_motion, ev_motions,
                          ev_min_mag, ev_out);
    });
  }
  if (synth->parsed()) return guarded([&] { return cmd_synth(sy_spec, sy_out); });
  if (report->parsed()) {
    return guarded([&] { return cmd_report(rp_logs, rp_bucket, rp_fps, rp_out); });
  }
  return 0;
}
