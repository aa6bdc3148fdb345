#pragma once

#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "traffic/behaviors.hpp"
#include "traffic/detect.hpp"
#include "traffic/flow.hpp"
#include "traffic/pipeline.hpp"
#include "traffic/sink.hpp"
#include "traffic/video_io.hpp"
#include "traffic/zones.hpp"

namespace traffic {

// Stage factories. Stateless stages may run with any worker count;
// factories marked single-worker keep mutable state and their StageSpec
// must declare worker_count 1 (config validation enforces this).

// Stateless: attaches detections preloaded from a file, empty where the
// file has none for a frame.
StageFn make_file_detect_stage(
    std::shared_ptr<const std::map<std::int64_t, std::vector<Detection>>> dets);

// Single-worker (running background model).
StageFn make_blob_detect_stage(double alpha, double k, int min_area);

// Single-worker (needs the previous frame). Attaches per-detection motion
// aligned with the detections payload.
StageFn make_flow_stage(FlowParams params, int min_support);

// Single-worker (tracklet state). Requires detections and motions payloads.
StageFn make_behavior_stage(ZoneMap zones, BehaviorParams params);

// Stateless: replaces the frame with an RGB24 render of zone tint, boxes,
// motion arrows and event highlights.
StageFn make_render_stage(std::shared_ptr<const ZoneMap> zones);

SinkFn make_log_sink(std::shared_ptr<StreamLogger> logger);

// Collects RGB24 frames into a Y4M file; construct with the stream header.
class VideoSink {
 public:
  VideoSink(const std::string& path, Y4mHeader header);
  void operator()(const FrameEnvelope& env);

 private:
  std::shared_ptr<std::ofstream> out_;
  std::shared_ptr<Y4mWriter> writer_;
};

}  // namespace traffic
