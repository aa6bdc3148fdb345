#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traffic/envelope.hpp"

namespace traffic {

struct LogPaths {
  std::string detections;
  std::string motions;
  std::string events;
};

LogPaths log_paths(const std::string& dir);

// Terminal sink: one JSON line per detection / motion / event, flushed per
// frame so a crash leaves a prefix of valid lines. Single writer.
class StreamLogger {
 public:
  StreamLogger(const std::string& dir, std::string camera_id);

  void write_frame(const FrameEnvelope& env);
  const LogPaths& paths() const { return paths_; }

 private:
  LogPaths paths_;
  std::string camera_id_;
  std::ofstream det_out_;
  std::ofstream motion_out_;
  std::ofstream event_out_;
};

struct CountRecord {
  std::string camera_id;
  std::int64_t bucket = 0;
  double bucket_start_s = 0.0;
  std::string class_label;
  int count = 0;  // distinct tracklets (plus one per identity-less record)
  std::optional<double> mean_direction_deg;  // circular mean, y-up convention
  double mean_speed_px = 0.0;
};

struct EventCountRecord {
  std::string camera_id;
  std::int64_t bucket = 0;
  double bucket_start_s = 0.0;
  std::string kind;
  int count = 0;
};

struct Summary {
  std::vector<CountRecord> counts;
  std::vector<EventCountRecord> events;
  int skipped_lines = 0;
  std::vector<std::string> skipped_reasons;  // capped at a few entries
};

// Buckets by frame_seq / (bucket_seconds * fps); detections join their
// motion records on (frame_seq, det_index). Events bucket by first_seq.
// Malformed lines are counted and skipped.
Summary summarize(const LogPaths& logs, double bucket_seconds, double fps);

void counts_csv(const Summary& s, std::ostream& out);
void event_counts_csv(const Summary& s, std::ostream& out);
std::vector<std::string> write_summary(const Summary& s, const std::string& dir);

// Strict log readers for evaluation: rebuild per-frame detections (ordered
// by det_index) and the aligned motion slots. Malformed lines throw with
// path and line number.
std::map<std::int64_t, std::vector<Detection>> load_detection_log(const std::string& path);
std::map<std::int64_t, std::vector<std::optional<MotionEstimate>>> load_motion_log(
    const std::string& path);

}  // namespace traffic
