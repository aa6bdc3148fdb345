#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "traffic/types.hpp"
#include "traffic/zones.hpp"

namespace traffic {

struct BehaviorParams {
  double wrong_way_angle_deg = 90.0;
  double min_speed_px = 0.5;   // below this, direction is ignored
  int persist_frames = 5;      // consecutive-frame debounce
  double stop_speed_px = 0.3;
  int stop_frames = 125;       // ~5 s at 25 fps
  double assoc_iou = 0.3;

  void validate() const;
};

// Short-lived frame-to-frame identity, just enough state to debounce rules.
// Counters reset when the rule condition breaks, the zone changes, or the
// tracklet loses association (it is then dropped entirely).
struct TrackletState {
  TrackletState(std::int64_t id, BBox box, std::string cls, std::int64_t seq)
      : tracklet_id(id), bbox(box), class_label(std::move(cls)), last_seq(seq) {}

  std::int64_t tracklet_id;
  BBox bbox;
  std::string class_label;
  std::int64_t last_seq;
  int zone_id = 0;  // zone at the previous step

  int wrong_way_count = 0;
  bool wrong_way_fired = false;
  std::int64_t wrong_way_first = 0;
  double wrong_way_dev_sum = 0.0;
  double wrong_way_speed_sum = 0.0;

  int prohibited_count = 0;
  bool prohibited_fired = false;
  std::int64_t prohibited_first = 0;

  int stop_count = 0;
  bool stop_fired = false;
  std::int64_t stop_first = 0;
};

struct AssociationResult {
  std::vector<TrackletState> tracklets;
  // index into tracklets for each input detection (every detection gets one:
  // matched or freshly created)
  std::vector<std::size_t> det_to_tracklet;
};

// Greedy same-class matching by descending IOU between previous boxes and
// the frame's detections; pairs below assoc_iou stay unmatched. Unmatched
// old tracklets are dropped, unmatched detections start new tracklets with
// ids drawn from next_id.
AssociationResult associate(std::vector<TrackletState> prev,
                            const std::vector<Detection>& dets,
                            double assoc_iou, std::int64_t& next_id);

// Rule checks mutate the tracklet's counters and emit at most one event per
// condition episode. `zone` is null when the detection sits on an unlabeled
// pixel; every rule treats that as condition-false.
std::optional<BehaviorEvent> check_wrong_way(TrackletState& st,
                                             const std::optional<MotionEstimate>& motion,
                                             const ZoneMeta* zone,
                                             const BehaviorParams& p);
std::optional<BehaviorEvent> check_prohibited_surface(TrackletState& st,
                                                      const ZoneMeta* zone,
                                                      const BehaviorParams& p);
std::optional<BehaviorEvent> check_illegal_stop(TrackletState& st,
                                                const std::optional<MotionEstimate>& motion,
                                                const ZoneMeta* zone,
                                                const BehaviorParams& p);

// Sequential rule engine: feed one frame at a time in stream order from a
// single worker. Deterministic given the input stream.
class BehaviorEngine {
 public:
  BehaviorEngine(ZoneMap zones, BehaviorParams params);

  std::vector<BehaviorEvent> step(std::int64_t seq,
                                  const std::vector<Detection>& dets,
                                  const std::vector<std::optional<MotionEstimate>>& motions);

  const std::vector<TrackletState>& tracklets() const { return tracks_; }
  // tracklet id per detection of the last step() call
  const std::vector<std::int64_t>& last_track_ids() const { return last_ids_; }

 private:
  ZoneMap zones_;
  BehaviorParams params_;
  std::vector<TrackletState> tracks_;
  std::vector<std::int64_t> last_ids_;
  std::int64_t next_id_ = 1;
};

}  // namespace traffic
