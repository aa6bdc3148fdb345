#include "traffic/sink.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace traffic {

namespace {

using nlohmann::json;

json bbox_json(const BBox& b) {
  return json::array({b.x_min(), b.y_min(), b.x_max(), b.y_max()});
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

LogPaths log_paths(const std::string& dir) {
  return {dir + "/detections.jsonl", dir + "/motions.jsonl", dir + "/events.jsonl"};
}

StreamLogger::StreamLogger(const std::string& dir, std::string camera_id)
    : paths_(log_paths(dir)), camera_id_(std::move(camera_id)) {
  std::filesystem::create_directories(dir);
  det_out_.open(paths_.detections, std::ios::binary);
  motion_out_.open(paths_.motions, std::ios::binary);
  event_out_.open(paths_.events, std::ios::binary);
  if (!det_out_ || !motion_out_ || !event_out_)
    throw std::runtime_error("cannot open log files under " + dir);
}

void StreamLogger::write_frame(const FrameEnvelope& env) {
  const auto* dets = env.get<DetectionsPayload>(keys::kDetections);
  const auto* motions = env.get<MotionsPayload>(keys::kMotions);
  const auto* events = env.get<EventsPayload>(keys::kEvents);
  const auto* tracks = env.get<TrackIdsPayload>(keys::kTrackIds);

  if (dets) {
    for (std::size_t i = 0; i < dets->items.size(); ++i) {
      const Detection& d = dets->items[i];
      std::int64_t track_id = -1;
      if (tracks && i < tracks->per_detection.size()) track_id = tracks->per_detection[i];
      json j{{"camera_id", camera_id_},
             {"frame_seq", env.seq()},
             {"t_ms", env.frame().timestamp_ms()},
             {"det_index", i},
             {"class_label", d.class_label},
             {"bbox", bbox_json(d.bbox)},
             {"objectness", d.objectness},
             {"class_confidence", d.class_confidence},
             {"track_id", track_id}};
      det_out_ << j.dump() << '\n';

      if (motions && i < motions->per_detection.size() && motions->per_detection[i]) {
        const MotionEstimate& m = *motions->per_detection[i];
        json mj{{"camera_id", camera_id_},
                {"frame_seq", env.seq()},
                {"det_index", i},
                {"dx", m.dx},
                {"dy", m.dy},
                {"magnitude", m.magnitude},
                {"support", m.support}};
        mj["angle_deg"] = m.angle_deg ? json(*m.angle_deg) : json(nullptr);
        motion_out_ << mj.dump() << '\n';
      }
    }
  }
  if (events) {
    for (const BehaviorEvent& e : events->items) {
      json ev{{"camera_id", camera_id_},
              {"kind", to_string(e.kind)},
              {"first_seq", e.first_seq},
              {"last_seq", e.last_seq},
              {"t_ms", env.frame().timestamp_ms()},
              {"class_label", e.class_label},
              {"zone_id", e.zone_id},
              {"bbox", bbox_json(e.bbox)},
              {"evidence", e.evidence}};
      event_out_ << ev.dump() << '\n';
    }
  }

  det_out_.flush();
  motion_out_.flush();
  event_out_.flush();
  if (!det_out_ || !motion_out_ || !event_out_)
    throw std::runtime_error("log write failed (disk full or closed stream)");
}

namespace {

void for_each_line(const std::string& path, Summary& summary,
                   const std::function<void(const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open log file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const std::exception& e) {
      ++summary.skipped_lines;
      if (summary.skipped_reasons.size() < 5)
        summary.skipped_reasons.push_back(path + ":" + std::to_string(line_no) + ": " +
                                          e.what());
    }
  }
}

}  // namespace

Summary summarize(const LogPaths& logs, double bucket_seconds, double fps) {
  if (bucket_seconds <= 0.0 || fps <= 0.0)
    throw std::invalid_argument("summarize: bucket_seconds and fps must be > 0");
  double frames_per_bucket = bucket_seconds * fps;
  auto bucket_of = [&](std::int64_t seq) {
    return static_cast<std::int64_t>(std::floor(seq / frames_per_bucket));
  };

  Summary summary;

  // (camera, bucket, class) -> accumulators; detections keyed for the
  // motion join
  struct Acc {
    std::set<std::int64_t> track_ids;
    int anonymous = 0;
    double sum_cos = 0, sum_sin = 0;
    int angle_n = 0;
    double speed_sum = 0;
    int speed_n = 0;
  };
  std::map<std::tuple<std::string, std::int64_t, std::string>, Acc> groups;
  std::map<std::pair<std::int64_t, std::int64_t>,
           std::tuple<std::string, std::int64_t, std::string>> det_key;

  for_each_line(logs.detections, summary, [&](const json& j) {
    std::int64_t seq = j.at("frame_seq").get<std::int64_t>();
    std::int64_t idx = j.at("det_index").get<std::int64_t>();
    std::string camera = j.at("camera_id").get<std::string>();
    std::string cls = j.at("class_label").get<std::string>();
    std::int64_t track = j.at("track_id").get<std::int64_t>();
    auto key = std::make_tuple(camera, bucket_of(seq), cls);
    Acc& acc = groups[key];
    if (track >= 0)
      acc.track_ids.insert(track);
    else
      ++acc.anonymous;
    det_key[{seq, idx}] = key;
  });

  for_each_line(logs.motions, summary, [&](const json& j) {
    std::int64_t seq = j.at("frame_seq").get<std::int64_t>();
    std::int64_t idx = j.at("det_index").get<std::int64_t>();
    auto it = det_key.find({seq, idx});
    if (it == det_key.end()) throw std::runtime_error("motion without detection");
    Acc& acc = groups[it->second];
    acc.speed_sum += j.at("magnitude").get<double>();
    ++acc.speed_n;
    if (j.contains("angle_deg") && !j.at("angle_deg").is_null()) {
      double rad = j.at("angle_deg").get<double>() * 3.14159265358979323846 / 180.0;
      acc.sum_cos += std::cos(rad);
      acc.sum_sin += std::sin(rad);
      ++acc.angle_n;
    }
  });

  std::map<std::tuple<std::string, std::int64_t, std::string>, int> event_groups;
  for_each_line(logs.events, summary, [&](const json& j) {
    std::string camera = j.at("camera_id").get<std::string>();
    std::string kind = j.at("kind").get<std::string>();
    std::int64_t seq = j.at("first_seq").get<std::int64_t>();
    ++event_groups[{camera, bucket_of(seq), kind}];
  });

  for (const auto& [key, acc] : groups) {
    CountRecord rec;
    rec.camera_id = std::get<0>(key);
    rec.bucket = std::get<1>(key);
    rec.bucket_start_s = rec.bucket * bucket_seconds;
    rec.class_label = std::get<2>(key);
    rec.count = static_cast<int>(acc.track_ids.size()) + acc.anonymous;
    if (acc.angle_n > 0) {
      double deg = std::atan2(acc.sum_sin, acc.sum_cos) * 180.0 / 3.14159265358979323846;
      if (deg < 0) deg += 360.0;
      rec.mean_direction_deg = deg;
    }
    if (acc.speed_n > 0) rec.mean_speed_px = acc.speed_sum / acc.speed_n;
    summary.counts.push_back(std::move(rec));
  }
  for (const auto& [key, count] : event_groups) {
    EventCountRecord rec;
    rec.camera_id = std::get<0>(key);
    rec.bucket = std::get<1>(key);
    rec.bucket_start_s = rec.bucket * bucket_seconds;
    rec.kind = std::get<2>(key);
    rec.count = count;
    summary.events.push_back(std::move(rec));
  }
  return summary;
}

void counts_csv(const Summary& s, std::ostream& out) {
  out << "camera_id,bucket,bucket_start_s,class_label,count,mean_direction_deg,mean_speed_px\n";
  for (const auto& r : s.counts) {
    out << r.camera_id << ',' << r.bucket << ',' << num(r.bucket_start_s) << ','
        << r.class_label << ',' << r.count << ','
        << (r.mean_direction_deg ? num(*r.mean_direction_deg) : std::string()) << ','
        << num(r.mean_speed_px) << '\n';
  }
}

void event_counts_csv(const Summary& s, std::ostream& out) {
  out << "camera_id,bucket,bucket_start_s,kind,count\n";
  for (const auto& r : s.events)
    out << r.camera_id << ',' << r.bucket << ',' << num(r.bucket_start_s) << ','
        << r.kind << ',' << r.count << '\n';
}

std::vector<std::string> write_summary(const Summary& s, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  {
    std::ofstream out(dir + "/counts.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write counts.csv");
    counts_csv(s, out);
    paths.push_back(dir + "/counts.csv");
  }
  {
    std::ofstream out(dir + "/event_counts.csv", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write event_counts.csv");
    event_counts_csv(s, out);
    paths.push_back(dir + "/event_counts.csv");
  }
  return paths;
}

namespace {

// Strict line-by-line JSON reader; rethrows with path:line context.
template <typename Fn>
void read_log_strict(const std::string& path, Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open log file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

BBox bbox_from_json(const json& b) {
  if (!b.is_array() || b.size() != 4)
    throw std::runtime_error("bbox must be [x_min, y_min, x_max, y_max]");
  return BBox(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
              b[3].get<double>());
}

}  // namespace

std::map<std::int64_t, std::vector<Detection>> load_detection_log(const std::string& path) {
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, Detection>>> rows;
  read_log_strict(path, [&](const json& j) {
    Detection d{j.at("frame_seq").get<std::int64_t>(),
                bbox_from_json(j.at("bbox")),
                j.at("class_label").get<std::string>(),
                j.at("objectness").get<double>(),
                j.at("class_confidence").get<double>(),
                std::nullopt};
    d.validate();
    rows[d.frame_seq].emplace_back(j.at("det_index").get<std::int64_t>(), d);
  });
  std::map<std::int64_t, std::vector<Detection>> out;
  for (auto& [seq, frame_rows] : rows) {
    std::sort(frame_rows.begin(), frame_rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    auto& dst = out[seq];
    dst.reserve(frame_rows.size());
    for (auto& [idx, det] : frame_rows) dst.push_back(std::move(det));
  }
  return out;
}

std::map<std::int64_t, std::vector<std::optional<MotionEstimate>>> load_motion_log(
    const std::string& path) {
  std::map<std::int64_t, std::vector<std::optional<MotionEstimate>>> out;
  read_log_strict(path, [&](const json& j) {
    const auto seq = j.at("frame_seq").get<std::int64_t>();
    const auto idx = j.at("det_index").get<std::size_t>();
    MotionEstimate m{j.at("dx").get<double>(), j.at("dy").get<double>(), std::nullopt,
                     j.at("magnitude").get<double>(), j.at("support").get<int>()};
    if (j.contains("angle_deg") && !j.at("angle_deg").is_null())
      m.angle_deg = j.at("angle_deg").get<double>();
    auto& slots = out[seq];
    if (slots.size() <= idx) slots.resize(idx + 1);
    slots[idx] = m;
  });
  return out;
}

}  // namespace traffic
