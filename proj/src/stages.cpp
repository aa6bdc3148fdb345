#include "traffic/stages.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "traffic/envelope.hpp"
#include "traffic/render.hpp"
#include "traffic/video_io.hpp"

namespace traffic {

namespace {

const std::vector<Detection>& require_detections(const FrameEnvelope& env) {
  const auto* p = env.get<DetectionsPayload>(keys::kDetections);
  if (p == nullptr) {
    throw std::runtime_error("detections payload missing; add a detector stage upstream");
  }
  return p->items;
}

Frame as_rgb(const Frame& f) {
  switch (f.format()) {
    case PixelFormat::RGB24:
      return f;
    case PixelFormat::GRAY8:
      return gray_to_rgb(f);
    case PixelFormat::YCbCr420:
      return ycbcr_to_rgb(f);
  }
  throw std::logic_error("as_rgb: unknown format");
}

Rgb surface_color(Surface s) {
  switch (s) {
    case Surface::ROAD:
      return {70, 70, 200};
    case Surface::SIDEWALK:
      return {200, 160, 60};
    case Surface::CROSSWALK:
      return {200, 60, 200};
    case Surface::OTHER:
      return {100, 200, 100};
  }
  return {255, 255, 255};
}

Rgb class_color(const std::string& label) {
  static const Rgb palette[] = {{60, 220, 60},  {60, 180, 255}, {255, 200, 40},
                                {240, 120, 40}, {180, 120, 255}, {90, 230, 200}};
  std::size_t h = 1469598103934665603ull;
  for (char c : label) {
    h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
  }
  return palette[h % (sizeof(palette) / sizeof(palette[0]))];
}

}  // namespace

StageFn make_file_detect_stage(
    std::shared_ptr<const std::map<std::int64_t, std::vector<Detection>>> dets) {
  return [dets = std::move(dets)](std::vector<FrameEnvelope>& batch) {
    for (auto& env : batch) {
      DetectionsPayload payload;
      if (auto it = dets->find(env.seq()); it != dets->end()) {
        payload.items = it->second;
      }
      env.attach(keys::kDetections, std::move(payload));
    }
  };
}

StageFn make_blob_detect_stage(double alpha, double k, int min_area) {
  auto model = std::make_shared<BackgroundModel>(alpha, k);
  return [model, min_area](std::vector<FrameEnvelope>& batch) {
    for (auto& env : batch) {
      Frame gray = to_gray(env.frame());
      DetectionsPayload payload{blob_detect(*model, gray, min_area)};
      env.attach(keys::kDetections, std::move(payload));
    }
  };
}

StageFn make_flow_stage(FlowParams params, int min_support) {
  params.validate();
  if (min_support < 1) {
    throw std::invalid_argument("flow stage: min_support must be >= 1");
  }
  auto prev = std::make_shared<std::vector<Frame>>();
  return [prev, params, min_support](std::vector<FrameEnvelope>& batch) {
    for (auto& env : batch) {
      const auto& dets = require_detections(env);
      auto pyr = build_pyramid(to_gray(env.frame()), params.pyramid_levels);
      MotionsPayload out;
      out.per_detection.assign(dets.size(), std::nullopt);
      if (!prev->empty()) {
        auto feats = shi_tomasi(prev->front(), params);
        auto tracked = lk_track(*prev, pyr, feats, params);
        for (std::size_t i = 0; i < dets.size(); ++i) {
          out.per_detection[i] = box_motion(tracked, dets[i].bbox, min_support);
        }
      }
      *prev = std::move(pyr);
      env.attach(keys::kMotions, std::move(out));
    }
  };
}

StageFn make_behavior_stage(ZoneMap zones, BehaviorParams params) {
  auto engine = std::make_shared<BehaviorEngine>(std::move(zones), params);
  return [engine](std::vector<FrameEnvelope>& batch) {
    for (auto& env : batch) {
      const auto& dets = require_detections(env);
      const auto* motions = env.get<MotionsPayload>(keys::kMotions);
      if (motions == nullptr) {
        throw std::runtime_error("motions payload missing; add a flow stage upstream");
      }
      EventsPayload events{engine->step(env.seq(), dets, motions->per_detection)};
      env.attach(keys::kEvents, std::move(events));
      env.attach(keys::kTrackIds, TrackIdsPayload{engine->last_track_ids()});
    }
  };
}

StageFn make_render_stage(std::shared_ptr<const ZoneMap> zones) {
  std::optional<MaskTintCmd> tint;
  if (zones && zones->raster) {
    MaskTintCmd cmd;
    cmd.raster = zones->raster;
    cmd.width = zones->width;
    cmd.height = zones->height;
    for (const auto& [id, meta] : zones->zones) {
      cmd.palette[static_cast<std::uint8_t>(id)] = surface_color(meta.surface);
    }
    tint = std::move(cmd);
  }
  return [tint](std::vector<FrameEnvelope>& batch) {
    for (auto& env : batch) {
      OverlayLayer layer;
      if (tint) {
        layer.commands.emplace_back(*tint);
      }
      const auto* dets = env.get<DetectionsPayload>(keys::kDetections);
      const auto* motions = env.get<MotionsPayload>(keys::kMotions);
      const auto* ids = env.get<TrackIdsPayload>(keys::kTrackIds);
      if (dets != nullptr) {
        for (std::size_t i = 0; i < dets->items.size(); ++i) {
          const Detection& d = dets->items[i];
          std::string label = d.class_label;
          if (ids != nullptr && i < ids->per_detection.size() &&
              ids->per_detection[i] >= 0) {
            label += "#" + std::to_string(ids->per_detection[i]);
          }
          layer.commands.emplace_back(BoxCmd{d.bbox, class_color(d.class_label), label});
          if (motions != nullptr && i < motions->per_detection.size() &&
              motions->per_detection[i].has_value()) {
            const MotionEstimate& m = *motions->per_detection[i];
            // x4 so slow motion stays visible
            layer.commands.emplace_back(
                ArrowCmd{anchor_point(d.bbox), 4.0 * m.dx, 4.0 * m.dy, {255, 255, 40}});
          }
        }
      }
      if (const auto* events = env.get<EventsPayload>(keys::kEvents)) {
        for (const BehaviorEvent& e : events->items) {
          layer.commands.emplace_back(BoxCmd{e.bbox, {255, 40, 40}, to_string(e.kind)});
        }
      }
      env.replace_frame(render_overlay(as_rgb(env.frame()), layer));
    }
  };
}

SinkFn make_log_sink(std::shared_ptr<StreamLogger> logger) {
  return [logger = std::move(logger)](const FrameEnvelope& env) {
    logger->write_frame(env);
  };
}

VideoSink::VideoSink(const std::string& path, Y4mHeader header)
    : out_(std::make_shared<std::ofstream>(path, std::ios::binary)) {
  if (!*out_) {
    throw FormatError("cannot open output video: " + path);
  }
  writer_ = std::make_shared<Y4mWriter>(*out_, header);
}

void VideoSink::operator()(const FrameEnvelope& env) {
  const Frame& f = env.frame();
  switch (f.format()) {
    case PixelFormat::YCbCr420:
      writer_->write(f);
      return;
    case PixelFormat::RGB24:
      writer_->write(rgb_to_ycbcr420(f));
      return;
    case PixelFormat::GRAY8:
      writer_->write(gray_to_ycbcr420(f));
      return;
  }
  throw std::logic_error("video sink: unknown format");
}

}  // namespace traffic
