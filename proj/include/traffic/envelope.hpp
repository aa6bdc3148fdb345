#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "traffic/frame.hpp"
#include "traffic/render.hpp"
#include "traffic/types.hpp"

namespace traffic {

// Payload keys shared by the built-in stages and sinks.
namespace keys {
inline constexpr const char* kDetections = "detections";
inline constexpr const char* kMotions = "motions";
inline constexpr const char* kEvents = "events";
inline constexpr const char* kTrackIds = "track_ids";
}  // namespace keys

struct DetectionsPayload {
  std::vector<Detection> items;
};

// Aligned with the frame's DetectionsPayload: entry i is the motion of
// detection i, nullopt when support was insufficient.
struct MotionsPayload {
  std::vector<std::optional<MotionEstimate>> per_detection;
};

struct EventsPayload {
  std::vector<BehaviorEvent> items;
};

// Aligned with DetectionsPayload: tracklet identity assigned by the
// behavior stage, -1 for detections without one.
struct TrackIdsPayload {
  std::vector<std::int64_t> per_detection;
};

struct OverlayPayload {
  OverlayLayer layer;
};

using Payload = std::variant<DetectionsPayload, MotionsPayload, EventsPayload,
                             TrackIdsPayload, OverlayPayload>;

// A frame plus everything the stages so far have derived from it.
class FrameEnvelope {
 public:
  explicit FrameEnvelope(Frame frame) : frame_(std::move(frame)) {}

  std::int64_t seq() const { return frame_.seq(); }
  const Frame& frame() const { return frame_; }

  // Stages that rewrite pixels (e.g. overlay rendering) swap the frame;
  // the sequence number must not change.
  void replace_frame(Frame frame) {
    if (frame.seq() != frame_.seq()) {
      throw std::logic_error("FrameEnvelope: replacement frame changes seq");
    }
    frame_ = std::move(frame);
  }

  void attach(const std::string& key, Payload payload) {
    auto [it, inserted] = payloads_.emplace(key, std::move(payload));
    (void)it;
    if (!inserted) {
      throw std::logic_error("FrameEnvelope: duplicate payload key '" + key + "'");
    }
  }

  const Payload* find(const std::string& key) const {
    auto it = payloads_.find(key);
    return it == payloads_.end() ? nullptr : &it->second;
  }

  template <typename T>
  const T* get(const std::string& key) const {
    const Payload* p = find(key);
    return p == nullptr ? nullptr : std::get_if<T>(p);
  }

  const std::map<std::string, Payload>& payloads() const { return payloads_; }

 private:
  Frame frame_;
  std::map<std::string, Payload> payloads_;
};

}  // namespace traffic
