#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "traffic/envelope.hpp"
#include "traffic/sink.hpp"

using namespace traffic;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("sink_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string str() const { return path.string(); }
};

Frame gray(std::int64_t seq, int w = 8, int h = 6) {
  return Frame(seq, 40.0 * seq, w, h, PixelFormat::GRAY8,
               std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 17));
}

Detection det(std::int64_t seq, double x0, double y0, std::string label,
              double obj = 1.0, double conf = 1.0) {
  return Detection{seq,  BBox(x0, y0, x0 + 10, y0 + 8), std::move(label),
                   obj,  conf,                          std::nullopt};
}

MotionEstimate motion_deg(double angle_deg, double magnitude) {
  MotionEstimate m;
  m.dx = magnitude;
  m.dy = 0.0;
  m.angle_deg = angle_deg;
  m.magnitude = magnitude;
  m.support = 3;
  return m;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& path) {
  std::vector<std::string> out;
  std::istringstream ss(slurp(path));
  std::string line;
  while (std::getline(ss, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::vector<std::string> keys_of(const json& j) {
  std::vector<std::string> k;
  for (auto it = j.begin(); it != j.end(); ++it) k.push_back(it.key());
  return k;
}

void require_same_summary(const Summary& a, const Summary& b) {
  REQUIRE(a.counts.size() == b.counts.size());
  for (std::size_t i = 0; i < a.counts.size(); ++i) {
    CHECK(a.counts[i].camera_id == b.counts[i].camera_id);
    CHECK(a.counts[i].bucket == b.counts[i].bucket);
    CHECK(a.counts[i].class_label == b.counts[i].class_label);
    CHECK(a.counts[i].count == b.counts[i].count);
    REQUIRE(a.counts[i].mean_direction_deg.has_value() ==
            b.counts[i].mean_direction_deg.has_value());
    if (a.counts[i].mean_direction_deg)
      CHECK(*a.counts[i].mean_direction_deg ==
            doctest::Approx(*b.counts[i].mean_direction_deg).epsilon(1e-12));
    CHECK(a.counts[i].mean_speed_px ==
          doctest::Approx(b.counts[i].mean_speed_px).epsilon(1e-12));
  }
  REQUIRE(a.events.size() == b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    CHECK(a.events[i].kind == b.events[i].kind);
    CHECK(a.events[i].bucket == b.events[i].bucket);
    CHECK(a.events[i].count == b.events[i].count);
  }
}

std::string det_line(std::int64_t seq, int idx, const std::string& cls,
                     std::int64_t track) {
  json j{{"camera_id", "cam"},
         {"frame_seq", seq},
         {"t_ms", 40.0 * seq},
         {"det_index", idx},
         {"class_label", cls},
         {"bbox", json::array({0.0, 0.0, 10.0, 10.0})},
         {"objectness", 1.0},
         {"class_confidence", 1.0},
         {"track_id", track}};
  return j.dump();
}

std::string motion_line(std::int64_t seq, int idx, double angle, double mag) {
  json j{{"camera_id", "cam"}, {"frame_seq", seq}, {"det_index", idx},
         {"dx", mag},          {"dy", 0.0},        {"magnitude", mag},
         {"support", 3},       {"angle_deg", angle}};
  return j.dump();
}

void write_file(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out);
  for (const auto& l : lines) out << l << '\n';
}

}  // namespace

TEST_CASE("the logger writes one detection line per detection in order") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam-7");
  for (int f = 0; f < 10; ++f) {
    FrameEnvelope env(gray(f));
    env.attach(keys::kDetections,
               DetectionsPayload{{det(f, 1, 1, "car"), det(f, 20, 1, "bus")}});
    logger.write_frame(env);
  }

  auto lines = lines_of(logger.paths().detections);
  REQUIRE(lines.size() == 20u);
  const std::vector<std::string> want_keys{
      "bbox",      "camera_id", "class_confidence", "class_label", "det_index",
      "frame_seq", "objectness", "t_ms",            "track_id"};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json j = json::parse(lines[i]);
    CHECK(keys_of(j) == want_keys);
    CHECK(j["frame_seq"].get<int>() == static_cast<int>(i / 2));
    CHECK(j["det_index"].get<int>() == static_cast<int>(i % 2));
    CHECK(j["camera_id"] == "cam-7");
    CHECK(j["t_ms"].get<double>() == doctest::Approx(40.0 * (i / 2)));
    CHECK(j["track_id"].get<std::int64_t>() == -1);  // no identity payload
    CHECK(j["bbox"].size() == 4u);
  }

  // the other two logs exist but hold nothing
  CHECK(slurp(logger.paths().motions).empty());
  CHECK(slurp(logger.paths().events).empty());
}

TEST_CASE("re-running the logger yields byte-identical logs") {
  auto run = [](const std::string& dir) {
    StreamLogger logger(dir, "cam");
    for (int f = 0; f < 5; ++f) {
      FrameEnvelope env(gray(f));
      env.attach(keys::kDetections,
                 DetectionsPayload{{det(f, 1, 1, "car", 0.75, 0.5),
                                    det(f, 18, 2, "motorcycle", 1.0, 0.9)}});
      env.attach(keys::kMotions,
                 MotionsPayload{{motion_deg(45.0, 2.5), std::nullopt}});
      env.attach(keys::kTrackIds, TrackIdsPayload{{7, 9}});
      if (f == 3) {
        BehaviorEvent e{BehaviorKind::WRONG_WAY,
                        0,
                        3,
                        BBox(1, 1, 11, 9),
                        "car",
                        2,
                        {{"frames", 4.0},
                         {"mean_deviation_deg", 180.0},
                         {"mean_speed_px", 2.5}}};
        env.attach(keys::kEvents, EventsPayload{{e}});
      }
      logger.write_frame(env);
    }
    return logger.paths();
  };

  TempDir a, b;
  LogPaths pa = run(a.str());
  LogPaths pb = run(b.str());
  CHECK_FALSE(slurp(pa.detections).empty());
  CHECK_FALSE(slurp(pa.motions).empty());
  CHECK_FALSE(slurp(pa.events).empty());
  CHECK(slurp(pa.detections) == slurp(pb.detections));
  CHECK(slurp(pa.motions) == slurp(pb.motions));
  CHECK(slurp(pa.events) == slurp(pb.events));
}

TEST_CASE("motion lines appear only for engaged slots and keep the nullable angle") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");

  FrameEnvelope e0(gray(0));
  e0.attach(keys::kDetections,
            DetectionsPayload{{det(0, 1, 1, "car"), det(0, 20, 1, "bus")}});
  e0.attach(keys::kMotions, MotionsPayload{{motion_deg(90.0, 3.0), std::nullopt}});
  logger.write_frame(e0);

  MotionEstimate still;  // too slow for a stable angle
  still.dx = 0.0;
  still.dy = 0.0;
  still.angle_deg = std::nullopt;
  still.magnitude = 0.0;
  still.support = 5;
  FrameEnvelope e1(gray(1));
  e1.attach(keys::kDetections, DetectionsPayload{{det(1, 1, 1, "car")}});
  e1.attach(keys::kMotions, MotionsPayload{{still}});
  logger.write_frame(e1);

  auto lines = lines_of(logger.paths().motions);
  REQUIRE(lines.size() == 2u);
  const std::vector<std::string> want_keys{"angle_deg", "camera_id", "det_index",
                                           "dx",        "dy",        "frame_seq",
                                           "magnitude", "support"};
  json m0 = json::parse(lines[0]);
  CHECK(keys_of(m0) == want_keys);
  CHECK(m0["det_index"] == 0);
  CHECK(m0["angle_deg"].get<double>() == doctest::Approx(90.0));
  CHECK(m0["support"] == 3);

  json m1 = json::parse(lines[1]);
  CHECK(m1["frame_seq"] == 1);
  CHECK(m1["angle_deg"].is_null());
}

TEST_CASE("event lines carry the episode fields and evidence map") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam-3");

  BehaviorEvent e{BehaviorKind::ILLEGAL_STOP, 3,    8, BBox(1, 2, 11, 12),
                  "car",                      2,    {{"dwell_frames", 6.0}}};
  FrameEnvelope env(gray(8));
  env.attach(keys::kEvents, EventsPayload{{e}});
  logger.write_frame(env);

  auto lines = lines_of(logger.paths().events);
  REQUIRE(lines.size() == 1u);
  json j = json::parse(lines[0]);
  const std::vector<std::string> want_keys{"bbox",      "camera_id", "class_label",
                                           "evidence",  "first_seq", "kind",
                                           "last_seq",  "t_ms",      "zone_id"};
  CHECK(keys_of(j) == want_keys);
  CHECK(j["kind"] == "ILLEGAL_STOP");
  CHECK(j["first_seq"] == 3);
  CHECK(j["last_seq"] == 8);
  CHECK(j["zone_id"] == 2);
  CHECK(j["class_label"] == "car");
  CHECK(j["t_ms"].get<double>() == doctest::Approx(320.0));
  CHECK(j["bbox"] == json::array({1.0, 2.0, 11.0, 12.0}));
  CHECK(j["evidence"]["dwell_frames"].get<double>() == doctest::Approx(6.0));
}

TEST_CASE("the strict loaders round trip what the logger wrote") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");
  std::map<std::int64_t, std::vector<Detection>> written;
  for (int f = 0; f < 3; ++f) {
    std::vector<Detection> dets{det(f, 1, 1, "car", 0.9, 0.8),
                                det(f, 15, 2, "bus"),
                                det(f, 30, 3, "pedestrian", 0.4, 1.0)};
    FrameEnvelope env(gray(f, 64, 48));
    env.attach(keys::kDetections, DetectionsPayload{dets});
    env.attach(keys::kMotions,
               MotionsPayload{{motion_deg(10.0, 1.0), std::nullopt,
                               motion_deg(200.0, 4.0)}});
    logger.write_frame(env);
    written[f] = dets;
  }

  auto dets_back = load_detection_log(logger.paths().detections);
  REQUIRE(dets_back.size() == 3u);
  for (const auto& [seq, list] : dets_back) {
    REQUIRE(list.size() == 3u);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Detection& want = written[seq][i];
      CHECK(list[i].frame_seq == seq);
      CHECK(list[i].bbox == want.bbox);
      CHECK(list[i].class_label == want.class_label);
      CHECK(list[i].objectness == doctest::Approx(want.objectness));
      CHECK(list[i].class_confidence == doctest::Approx(want.class_confidence));
    }
  }

  auto motions_back = load_motion_log(logger.paths().motions);
  REQUIRE(motions_back.size() == 3u);
  for (const auto& [seq, slots] : motions_back) {
    REQUIRE(slots.size() == 3u);  // index 2 forces the gap at index 1
    CHECK(slots[0].has_value());
    CHECK_FALSE(slots[1].has_value());
    REQUIRE(slots[2].has_value());
    CHECK(slots[2]->magnitude == doctest::Approx(4.0));
    CHECK(slots[2]->angle_deg.has_value());
  }
}

TEST_CASE("loading a shuffled detection log restores det_index order") {
  TempDir tmp;
  std::string path = tmp.str() + "/detections.jsonl";
  write_file(path, {det_line(0, 2, "bus", -1), det_line(0, 0, "car", -1),
                    det_line(0, 1, "pedestrian", -1)});
  auto back = load_detection_log(path);
  REQUIRE(back.size() == 1u);
  REQUIRE(back[0].size() == 3u);
  CHECK(back[0][0].class_label == "car");
  CHECK(back[0][1].class_label == "pedestrian");
  CHECK(back[0][2].class_label == "bus");
}

TEST_CASE("strict loaders name the offending line") {
  TempDir tmp;
  std::string path = tmp.str() + "/detections.jsonl";
  write_file(path, {det_line(0, 0, "car", -1), "{not valid json"});
  try {
    load_detection_log(path);
    FAIL("expected a parse failure");
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    CHECK(msg.find(path) != std::string::npos);
    CHECK(msg.find(":2:") != std::string::npos);
  }

  // syntactically fine but semantically invalid record
  json bad = json::parse(det_line(0, 0, "car", -1));
  bad["objectness"] = 2.0;
  write_file(path, {bad.dump()});
  try {
    load_detection_log(path);
    FAIL("expected a validation failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
}

TEST_CASE("summarize counts a tracklet once per bucket it spans") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");
  for (int f = 0; f < 10; ++f) {
    std::vector<Detection> dets{det(f, 1, 1, "car")};
    std::vector<std::int64_t> tracks{7};
    if (f < 3) {
      dets.push_back(det(f, 20, 1, "pedestrian"));
      tracks.push_back(-1);  // identity-less records each count once
    }
    FrameEnvelope env(gray(f, 64, 48));
    env.attach(keys::kDetections, DetectionsPayload{dets});
    env.attach(keys::kTrackIds, TrackIdsPayload{tracks});
    logger.write_frame(env);
  }

  // 5 fps, 1 s buckets: frames 0-4 land in bucket 0, frames 5-9 in bucket 1
  Summary s = summarize(logger.paths(), 1.0, 5.0);
  CHECK(s.skipped_lines == 0);
  REQUIRE(s.counts.size() == 3u);
  CHECK(s.counts[0].bucket == 0);
  CHECK(s.counts[0].class_label == "car");
  CHECK(s.counts[0].count == 1);
  CHECK(s.counts[0].bucket_start_s == doctest::Approx(0.0));
  CHECK(s.counts[1].bucket == 0);
  CHECK(s.counts[1].class_label == "pedestrian");
  CHECK(s.counts[1].count == 3);
  CHECK(s.counts[2].bucket == 1);
  CHECK(s.counts[2].class_label == "car");
  CHECK(s.counts[2].count == 1);
  CHECK(s.counts[2].bucket_start_s == doctest::Approx(1.0));
  CHECK(s.events.empty());
}

TEST_CASE("summarize takes the circular mean across the 0/360 seam") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");
  for (int f = 0; f < 2; ++f) {
    FrameEnvelope env(gray(f));
    env.attach(keys::kDetections, DetectionsPayload{{det(f, 1, 1, "car")}});
    env.attach(keys::kMotions,
               MotionsPayload{{motion_deg(f == 0 ? 350.0 : 10.0, f == 0 ? 2.0 : 4.0)}});
    logger.write_frame(env);
  }

  Summary s = summarize(logger.paths(), 1.0, 5.0);
  REQUIRE(s.counts.size() == 1u);
  REQUIRE(s.counts[0].mean_direction_deg.has_value());
  // arithmetic mean of {350, 10} would report 180, the opposite heading
  double dir = *s.counts[0].mean_direction_deg;
  double seam = std::min(dir, 360.0 - dir);
  CHECK(seam <= 1e-9);
  CHECK(s.counts[0].mean_speed_px == doctest::Approx(3.0));
}

TEST_CASE("summarize skips malformed lines and records why") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");
  FrameEnvelope env(gray(0));
  env.attach(keys::kDetections, DetectionsPayload{{det(0, 1, 1, "car")}});
  logger.write_frame(env);

  {
    std::ofstream app(logger.paths().detections, std::ios::binary | std::ios::app);
    app << "%% not json %%\n";
  }
  {
    // motion referencing a detection that was never logged
    std::ofstream app(logger.paths().motions, std::ios::binary | std::ios::app);
    app << motion_line(42, 0, 10.0, 1.0) << '\n';
  }

  Summary s = summarize(logger.paths(), 1.0, 5.0);
  CHECK(s.skipped_lines == 2);
  REQUIRE_FALSE(s.skipped_reasons.empty());
  CHECK(s.skipped_reasons[0].find("detections.jsonl:2:") != std::string::npos);
  REQUIRE(s.counts.size() == 1u);
  CHECK(s.counts[0].count == 1);
}

TEST_CASE("empty logs summarize to an empty summary") {
  TempDir tmp;
  { StreamLogger logger(tmp.str(), "cam"); }  // creates three empty files
  Summary s = summarize(log_paths(tmp.str()), 60.0, 30.0);
  CHECK(s.counts.empty());
  CHECK(s.events.empty());
  CHECK(s.skipped_lines == 0);

  CHECK_THROWS_AS(summarize(log_paths(tmp.str()), 0.0, 30.0), std::invalid_argument);
  CHECK_THROWS_AS(summarize(log_paths(tmp.str()), 60.0, 0.0), std::invalid_argument);
}

TEST_CASE("events group by kind within the bucket of their first frame") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");
  auto emit = [&](BehaviorKind kind, std::int64_t first, std::int64_t last) {
    BehaviorEvent e{kind, first, last, BBox(0, 0, 10, 10), "car", 1, {}};
    FrameEnvelope env(gray(last));
    env.attach(keys::kEvents, EventsPayload{{e}});
    logger.write_frame(env);
  };
  for (std::int64_t f = 0; f < 4; ++f) emit(BehaviorKind::WRONG_WAY, f, f + 4);
  emit(BehaviorKind::ILLEGAL_STOP, 7, 12);

  // 1 fps, 5 s buckets: first_seq 0-3 fall in bucket 0, first_seq 7 in bucket 1
  Summary s = summarize(logger.paths(), 5.0, 1.0);
  REQUIRE(s.events.size() == 2u);
  CHECK(s.events[0].bucket == 0);
  CHECK(s.events[0].kind == "WRONG_WAY");
  CHECK(s.events[0].count == 4);
  CHECK(s.events[0].bucket_start_s == doctest::Approx(0.0));
  CHECK(s.events[1].bucket == 1);
  CHECK(s.events[1].kind == "ILLEGAL_STOP");
  CHECK(s.events[1].count == 1);
  CHECK(s.events[1].bucket_start_s == doctest::Approx(5.0));
}

TEST_CASE("summarize does not care about line order within a frame") {
  std::vector<std::string> dets{det_line(0, 0, "car", 3), det_line(0, 1, "bus", 4),
                                det_line(0, 2, "car", 5)};
  std::vector<std::string> motions{motion_line(0, 0, 30.0, 1.0),
                                   motion_line(0, 2, 60.0, 3.0)};

  TempDir a, b;
  write_file(a.str() + "/detections.jsonl", dets);
  write_file(a.str() + "/motions.jsonl", motions);
  write_file(a.str() + "/events.jsonl", {});

  std::reverse(dets.begin(), dets.end());
  std::reverse(motions.begin(), motions.end());
  write_file(b.str() + "/detections.jsonl", dets);
  write_file(b.str() + "/motions.jsonl", motions);
  write_file(b.str() + "/events.jsonl", {});

  Summary sa = summarize(log_paths(a.str()), 1.0, 5.0);
  Summary sb = summarize(log_paths(b.str()), 1.0, 5.0);
  require_same_summary(sa, sb);
  REQUIRE(sa.counts.size() == 2u);  // car x2, bus x1
  CHECK(sa.counts[0].class_label == "bus");
  CHECK(sa.counts[0].count == 1);
  CHECK(sa.counts[1].class_label == "car");
  CHECK(sa.counts[1].count == 2);
}

TEST_CASE("csv output is stable and leaves unknown directions blank") {
  TempDir tmp;
  StreamLogger logger(tmp.str(), "cam");
  FrameEnvelope env(gray(0));
  env.attach(keys::kDetections,
             DetectionsPayload{{det(0, 1, 1, "bus"), det(0, 20, 1, "car")}});
  env.attach(keys::kMotions, MotionsPayload{{std::nullopt, motion_deg(90.0, 2.0)}});
  logger.write_frame(env);

  Summary s = summarize(logger.paths(), 1.0, 5.0);
  std::ostringstream counts;
  counts_csv(s, counts);
  auto csv_lines = [](const std::string& text) {
    std::vector<std::string> out;
    std::istringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
  };
  auto rows = csv_lines(counts.str());
  REQUIRE(rows.size() == 3u);
  CHECK(rows[0] ==
        "camera_id,bucket,bucket_start_s,class_label,count,mean_direction_deg,mean_speed_px");
  CHECK(rows[1] == "cam,0,0.000000,bus,1,,0.000000");
  CHECK(rows[2] == "cam,0,0.000000,car,1,90.000000,2.000000");

  std::ostringstream events;
  event_counts_csv(s, events);
  CHECK(csv_lines(events.str()) ==
        std::vector<std::string>{"camera_id,bucket,bucket_start_s,kind,count"});

  auto written = write_summary(s, tmp.str() + "/summary");
  REQUIRE(written.size() == 2u);
  CHECK(slurp(written[0]) == counts.str());
  CHECK(slurp(written[1]) == events.str());
}
