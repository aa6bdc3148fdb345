#include "traffic/behaviors.hpp"

#include <algorithm>
#include <stdexcept>

namespace traffic {

void BehaviorParams::validate() const {
  if (!(wrong_way_angle_deg > 0.0 && wrong_way_angle_deg <= 180.0))
    throw std::invalid_argument("BehaviorParams: wrong_way_angle_deg must be in (0,180]");
  if (min_speed_px <= 0.0) throw std::invalid_argument("BehaviorParams: min_speed_px must be > 0");
  if (persist_frames < 1) throw std::invalid_argument("BehaviorParams: persist_frames must be >= 1");
  if (stop_speed_px <= 0.0) throw std::invalid_argument("BehaviorParams: stop_speed_px must be > 0");
  if (stop_frames < 1) throw std::invalid_argument("BehaviorParams: stop_frames must be >= 1");
  if (!(assoc_iou > 0.0 && assoc_iou <= 1.0))
    throw std::invalid_argument("BehaviorParams: assoc_iou must be in (0,1]");
}

AssociationResult associate(std::vector<TrackletState> prev,
                            const std::vector<Detection>& dets,
                            double assoc_iou, std::int64_t& next_id) {
  struct Pair {
    double iou;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < prev.size(); ++t)
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (prev[t].class_label != dets[d].class_label) continue;
      double v = iou(prev[t].bbox, dets[d].bbox);
      if (v >= assoc_iou) pairs.push_back({v, t, d});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.track != b.track) return a.track < b.track;
    return a.det < b.det;
  });

  std::vector<bool> track_used(prev.size(), false);
  std::vector<std::optional<std::size_t>> det_track(dets.size());
  for (const auto& pr : pairs) {
    if (track_used[pr.track] || det_track[pr.det]) continue;
    track_used[pr.track] = true;
    det_track[pr.det] = pr.track;
  }

  AssociationResult out;
  out.det_to_tracklet.resize(dets.size());
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (det_track[d]) {
      TrackletState st = prev[*det_track[d]];
      st.bbox = dets[d].bbox;
      st.last_seq = dets[d].frame_seq;
      out.det_to_tracklet[d] = out.tracklets.size();
      out.tracklets.push_back(std::move(st));
    } else {
      out.det_to_tracklet[d] = out.tracklets.size();
      out.tracklets.emplace_back(next_id++, dets[d].bbox, dets[d].class_label,
                                 dets[d].frame_seq);
    }
  }
  return out;
}

namespace {

BehaviorEvent make_event(BehaviorKind kind, const TrackletState& st,
                         std::int64_t first_seq, int zone_id,
                         std::map<std::string, double> evidence) {
  return BehaviorEvent{kind, first_seq, st.last_seq, st.bbox,
                       st.class_label, zone_id, std::move(evidence)};
}

}  // namespace

std::optional<BehaviorEvent> check_wrong_way(TrackletState& st,
                                             const std::optional<MotionEstimate>& motion,
                                             const ZoneMeta* zone,
                                             const BehaviorParams& p) {
  bool zone_changed = !zone || zone->zone_id != st.zone_id;
  double deviation = 0.0;
  bool holds = false;
  if (zone && zone->allowed_direction && motion && motion->magnitude >= p.min_speed_px) {
    // motion is in image axes (y down); allowed_direction uses the shared
    // y-up convention, so flip dy before comparing.
    deviation = angle_between_deg(motion->dx, -motion->dy,
                                  zone->allowed_direction->x, zone->allowed_direction->y);
    holds = deviation > p.wrong_way_angle_deg;
  }
  if (!holds || zone_changed) {
    st.wrong_way_count = 0;
    st.wrong_way_fired = false;
    st.wrong_way_dev_sum = 0.0;
    st.wrong_way_speed_sum = 0.0;
  }
  if (!holds) return std::nullopt;

  if (st.wrong_way_count == 0) st.wrong_way_first = st.last_seq;
  ++st.wrong_way_count;
  st.wrong_way_dev_sum += deviation;
  st.wrong_way_speed_sum += motion->magnitude;
  if (st.wrong_way_count == p.persist_frames && !st.wrong_way_fired) {
    st.wrong_way_fired = true;
    return make_event(BehaviorKind::WRONG_WAY, st, st.wrong_way_first, zone->zone_id,
                      {{"frames", static_cast<double>(st.wrong_way_count)},
                       {"mean_deviation_deg", st.wrong_way_dev_sum / st.wrong_way_count},
                       {"mean_speed_px", st.wrong_way_speed_sum / st.wrong_way_count}});
  }
  return std::nullopt;
}

std::optional<BehaviorEvent> check_prohibited_surface(TrackletState& st,
                                                      const ZoneMeta* zone,
                                                      const BehaviorParams& p) {
  bool zone_changed = !zone || zone->zone_id != st.zone_id;
  bool holds = zone && zone->prohibited_classes.count(st.class_label) > 0;
  if (!holds || zone_changed) {
    st.prohibited_count = 0;
    st.prohibited_fired = false;
  }
  if (!holds) return std::nullopt;

  if (st.prohibited_count == 0) st.prohibited_first = st.last_seq;
  ++st.prohibited_count;
  if (st.prohibited_count == p.persist_frames && !st.prohibited_fired) {
    st.prohibited_fired = true;
    return make_event(BehaviorKind::PROHIBITED_SURFACE, st, st.prohibited_first,
                      zone->zone_id,
                      {{"frames", static_cast<double>(st.prohibited_count)}});
  }
  return std::nullopt;
}

std::optional<BehaviorEvent> check_illegal_stop(TrackletState& st,
                                                const std::optional<MotionEstimate>& motion,
                                                const ZoneMeta* zone,
                                                const BehaviorParams& p) {
  bool zone_changed = !zone || zone->zone_id != st.zone_id;
  bool stopped = !motion || motion->magnitude < p.stop_speed_px;
  bool holds = zone && zone->no_stopping && stopped;
  if (!holds || zone_changed) {
    st.stop_count = 0;
    st.stop_fired = false;
  }
  if (!holds) return std::nullopt;

  if (st.stop_count == 0) st.stop_first = st.last_seq;
  ++st.stop_count;
  if (st.stop_count == p.stop_frames && !st.stop_fired) {
    st.stop_fired = true;
    return make_event(BehaviorKind::ILLEGAL_STOP, st, st.stop_first, zone->zone_id,
                      {{"dwell_frames", static_cast<double>(st.stop_count)}});
  }
  return std::nullopt;
}

BehaviorEngine::BehaviorEngine(ZoneMap zones, BehaviorParams params)
    : zones_(std::move(zones)), params_(params) {
  params_.validate();
}

std::vector<BehaviorEvent> BehaviorEngine::step(
    std::int64_t seq, const std::vector<Detection>& dets,
    const std::vector<std::optional<MotionEstimate>>& motions) {
  if (motions.size() != dets.size())
    throw std::invalid_argument("BehaviorEngine: one motion slot per detection required");

  auto assoc = associate(std::move(tracks_), dets, params_.assoc_iou, next_id_);
  tracks_ = std::move(assoc.tracklets);
  last_ids_.assign(dets.size(), -1);

  std::vector<BehaviorEvent> events;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    TrackletState& st = tracks_[assoc.det_to_tracklet[d]];
    st.last_seq = seq;
    last_ids_[d] = st.tracklet_id;

    int zid = zone_of_detection(zones_, dets[d]);
    const ZoneMeta* zone = nullptr;
    if (zid != 0) {
      auto it = zones_.zones.find(zid);
      if (it != zones_.zones.end()) zone = &it->second;
    }

    if (auto ev = check_wrong_way(st, motions[d], zone, params_)) events.push_back(*ev);
    if (auto ev = check_prohibited_surface(st, zone, params_)) events.push_back(*ev);
    if (auto ev = check_illegal_stop(st, motions[d], zone, params_)) events.push_back(*ev);
    st.zone_id = zid;
  }
  return events;
}

}  // namespace traffic
