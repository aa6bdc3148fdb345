#include "traffic/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "traffic/cvat.hpp"
#include "traffic/video_io.hpp"

namespace traffic {

double Rng::gaussian(double sigma) {
  double u1 = ((next() >> 11) + 1.0) * 0x1.0p-53;  // (0,1], keeps log finite
  double u2 = (next() >> 11) * 0x1.0p-53;
  return sigma * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t lattice_hash(std::int64_t x, std::int64_t y, std::uint64_t seed) {
  std::uint64_t z = seed;
  z ^= static_cast<std::uint64_t>(x) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z ^= static_cast<std::uint64_t>(y) * 0xc2b2ae3d27d4eb4fULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double value_noise(double x, double y, int cell_size, std::uint64_t seed) {
  double gx = x / cell_size;
  double gy = y / cell_size;
  std::int64_t x0 = static_cast<std::int64_t>(std::floor(gx));
  std::int64_t y0 = static_cast<std::int64_t>(std::floor(gy));
  double fx = gx - x0;
  double fy = gy - y0;
  // smoothstep fade keeps gradients continuous across cell edges
  double sx = fx * fx * (3.0 - 2.0 * fx);
  double sy = fy * fy * (3.0 - 2.0 * fy);

  auto corner = [&](std::int64_t cx, std::int64_t cy) {
    return (lattice_hash(cx, cy, seed) >> 11) * 0x1.0p-53 * 2.0 - 1.0;
  };
  double v00 = corner(x0, y0), v10 = corner(x0 + 1, y0);
  double v01 = corner(x0, y0 + 1), v11 = corner(x0 + 1, y0 + 1);
  return (1 - sy) * ((1 - sx) * v00 + sx * v10) + sy * ((1 - sx) * v01 + sx * v11);
}

void SceneSpec::validate() const {
  if (width < 2 || height < 2 || width % 2 || height % 2)
    throw std::invalid_argument("scene: dims must be even and >= 2 (4:2:0 video)");
  if (frame_count < 1) throw std::invalid_argument("scene: frame_count must be >= 1");
  if (fps < 1) throw std::invalid_argument("scene: fps must be >= 1");
  if (noise_sigma < 0.0) throw std::invalid_argument("scene: noise_sigma must be >= 0");
  behavior.validate();
  for (std::size_t i = 0; i < actors.size(); ++i) {
    const ActorSpec& a = actors[i];
    std::string who = "scene actor " + std::to_string(i);
    if (a.width < 1 || a.height < 1) throw std::invalid_argument(who + ": empty size");
    if (a.width > width || a.height > height)
      throw std::invalid_argument(who + ": actor larger than frame");
    if (a.waypoints.empty()) throw std::invalid_argument(who + ": no waypoints");
    if (a.spawn_frame < 0) throw std::invalid_argument(who + ": negative spawn_frame");
    for (const auto& w : a.waypoints)
      if (w.speed <= 0.0 || w.dwell < 0)
        throw std::invalid_argument(who + ": waypoint needs speed > 0 and dwell >= 0");
    const Vec2& s = a.waypoints.front().pos;
    if (s.x - a.width / 2.0 < 0 || s.y - a.height / 2.0 < 0 ||
        s.x + a.width / 2.0 > width || s.y + a.height / 2.0 > height)
      throw std::invalid_argument(who + ": spawns outside the frame");
  }
  if (zones && (zones->width != width || zones->height != height))
    throw std::invalid_argument("scene: zone map dims differ from frame dims");
}

namespace {

// Center position per frame; nullopt before spawn and after the trajectory
// is exhausted.
std::vector<std::optional<Vec2>> simulate(const ActorSpec& a, int frame_count) {
  std::vector<std::optional<Vec2>> pos(frame_count);
  std::size_t idx = 0;
  Vec2 cur = a.waypoints[0].pos;
  int dwell_left = a.waypoints[0].dwell;
  bool alive = true;
  for (int f = a.spawn_frame; f < frame_count && alive; ++f) {
    pos[f] = cur;
    if (dwell_left > 0) {
      --dwell_left;
      continue;
    }
    if (idx + 1 >= a.waypoints.size()) {
      alive = false;
      continue;
    }
    const Vec2& target = a.waypoints[idx + 1].pos;
    double dx = target.x - cur.x, dy = target.y - cur.y;
    double dist = std::hypot(dx, dy);
    double step = a.waypoints[idx].speed;
    if (step + 1e-9 >= dist) {
      cur = target;
      ++idx;
      dwell_left = a.waypoints[idx].dwell;
    } else {
      cur.x += dx / dist * step;
      cur.y += dy / dist * step;
    }
  }
  return pos;
}

BBox actor_box(const ActorSpec& a, const Vec2& center) {
  return BBox(center.x - a.width / 2.0, center.y - a.height / 2.0,
              center.x + a.width / 2.0, center.y + a.height / 2.0);
}

bool fully_visible(const BBox& b, int w, int h) {
  return b.x_min() >= 0 && b.y_min() >= 0 && b.x_max() <= w && b.y_max() <= h;
}

struct RuleCounters {
  int ww_count = 0;
  bool ww_fired = false;
  int ww_first = 0;
  double ww_dev = 0, ww_speed = 0;
  int pr_count = 0;
  bool pr_fired = false;
  int pr_first = 0;
  int st_count = 0;
  bool st_fired = false;
  int st_first = 0;
  int prev_zone = 0;

  void reset() { *this = RuleCounters{}; }
};

// Independent replay of the rule definitions on exact trajectories; no
// association, no pipeline, shared only with the angle helpers.
void replay_events(const SceneSpec& spec, const ActorSpec& a,
                   const std::vector<std::optional<Vec2>>& pos,
                   std::vector<BehaviorEvent>& out) {
  const BehaviorParams& p = spec.behavior;
  RuleCounters c;
  bool in_run = false;
  for (int f = 0; f < spec.frame_count; ++f) {
    if (!pos[f]) {
      c.reset();
      in_run = false;
      continue;
    }
    BBox box = actor_box(a, *pos[f]);
    if (!fully_visible(box, spec.width, spec.height)) {
      c.reset();
      in_run = false;
      continue;
    }
    bool run_start = !in_run;
    in_run = true;

    double mdx = 0.0, mdy = 0.0;
    if (!run_start && pos[f - 1]) {
      mdx = pos[f]->x - pos[f - 1]->x;
      mdy = pos[f]->y - pos[f - 1]->y;
    }
    double mag = std::hypot(mdx, mdy);

    int zid = 0;
    const ZoneMeta* zone = nullptr;
    if (spec.zones) {
      Vec2 anchor = anchor_point(box);
      zid = zone_at(*spec.zones, anchor.x, anchor.y);
      if (zid != 0) zone = &spec.zones->zones.at(zid);
    }
    bool zone_changed = !zone || zid != c.prev_zone;

    double deviation = 0.0;
    bool ww = false;
    if (zone && zone->allowed_direction && mag >= p.min_speed_px) {
      deviation = angle_between_deg(mdx, -mdy, zone->allowed_direction->x,
                                    zone->allowed_direction->y);
      ww = deviation > p.wrong_way_angle_deg;
    }
    if (!ww || zone_changed) {
      c.ww_count = 0;
      c.ww_fired = false;
      c.ww_dev = c.ww_speed = 0;
    }
    if (ww) {
      if (c.ww_count == 0) c.ww_first = f;
      ++c.ww_count;
      c.ww_dev += deviation;
      c.ww_speed += mag;
      if (c.ww_count == p.persist_frames && !c.ww_fired) {
        c.ww_fired = true;
        out.push_back(BehaviorEvent{
            BehaviorKind::WRONG_WAY, c.ww_first, f, box, a.class_label, zid,
            {{"frames", static_cast<double>(c.ww_count)},
             {"mean_deviation_deg", c.ww_dev / c.ww_count},
             {"mean_speed_px", c.ww_speed / c.ww_count}}});
      }
    }

    bool prohibited = zone && zone->prohibited_classes.count(a.class_label) > 0;
    if (!prohibited || zone_changed) {
      c.pr_count = 0;
      c.pr_fired = false;
    }
    if (prohibited) {
      if (c.pr_count == 0) c.pr_first = f;
      ++c.pr_count;
      if (c.pr_count == p.persist_frames && !c.pr_fired) {
        c.pr_fired = true;
        out.push_back(BehaviorEvent{BehaviorKind::PROHIBITED_SURFACE, c.pr_first, f,
                                    box, a.class_label, zid,
                                    {{"frames", static_cast<double>(c.pr_count)}}});
      }
    }

    bool stopped_zone = zone && zone->no_stopping && mag < p.stop_speed_px;
    if (!stopped_zone || zone_changed) {
      c.st_count = 0;
      c.st_fired = false;
    }
    if (stopped_zone) {
      if (c.st_count == 0) c.st_first = f;
      ++c.st_count;
      if (c.st_count == p.stop_frames && !c.st_fired) {
        c.st_fired = true;
        out.push_back(BehaviorEvent{BehaviorKind::ILLEGAL_STOP, c.st_first, f, box,
                                    a.class_label, zid,
                                    {{"dwell_frames", static_cast<double>(c.st_count)}}});
      }
    }

    c.prev_zone = zid;
  }
}

}  // namespace

Scene generate(const SceneSpec& spec) {
  spec.validate();
  int w = spec.width, h = spec.height;

  std::vector<std::uint8_t> bg(static_cast<std::size_t>(w) * h,
                               static_cast<std::uint8_t>(std::clamp(spec.background_gray, 0, 255)));
  if (spec.textured_background) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double n = 0.7 * value_noise(x, y, 8, spec.seed) +
                   0.3 * value_noise(x, y, 3, spec.seed ^ 0x5bd1e995ULL);
        bg[static_cast<std::size_t>(y) * w + x] = static_cast<std::uint8_t>(
            std::clamp<long>(std::lround(spec.background_gray + spec.background_amp * n), 0, 255));
      }
  }

  std::vector<std::vector<std::optional<Vec2>>> tracks;
  tracks.reserve(spec.actors.size());
  for (const auto& a : spec.actors) tracks.push_back(simulate(a, spec.frame_count));

  Scene scene;
  scene.spec = spec;
  double interval_ms = 1000.0 / spec.fps;
  for (int f = 0; f < spec.frame_count; ++f) {
    std::vector<std::uint8_t> px = bg;
    for (std::size_t ai = 0; ai < spec.actors.size(); ++ai) {
      if (!tracks[ai][f]) continue;
      const ActorSpec& a = spec.actors[ai];
      const Vec2& c = *tracks[ai][f];
      int ax = round_px(c.x - a.width / 2.0);
      int ay = round_px(c.y - a.height / 2.0);
      for (int j = 0; j < a.height; ++j) {
        int yy = ay + j;
        if (yy < 0 || yy >= h) continue;
        for (int i = 0; i < a.width; ++i) {
          int xx = ax + i;
          if (xx < 0 || xx >= w) continue;
          double n = value_noise(i, j, 4, a.texture_seed);
          px[static_cast<std::size_t>(yy) * w + xx] = static_cast<std::uint8_t>(
              std::clamp<long>(std::lround(a.base_gray + a.texture_amp * n), 0, 255));
        }
      }
    }
    if (spec.noise_sigma > 0.0) {
      Rng rng(lattice_hash(f, -7, spec.seed));
      for (auto& v : px)
        v = static_cast<std::uint8_t>(
            std::clamp<long>(std::lround(v + rng.gaussian(spec.noise_sigma)), 0, 255));
    }
    scene.frames.emplace_back(f, f * interval_ms, w, h, PixelFormat::GRAY8, std::move(px));
  }

  for (std::size_t ai = 0; ai < spec.actors.size(); ++ai) {
    const ActorSpec& a = spec.actors[ai];
    for (int f = 0; f < spec.frame_count; ++f) {
      if (!tracks[ai][f]) continue;
      BBox box = actor_box(a, *tracks[ai][f]);
      if (!fully_visible(box, w, h)) continue;
      std::optional<Vec2> motion;
      if (f > 0 && tracks[ai][f - 1])
        motion = Vec2{tracks[ai][f]->x - tracks[ai][f - 1]->x,
                      tracks[ai][f]->y - tracks[ai][f - 1]->y};
      scene.truth.push_back(GroundTruthBox{f, box, a.class_label,
                                           static_cast<int>(ai), motion});
    }
    replay_events(spec, a, tracks[ai], scene.expected_events);
  }
  std::sort(scene.truth.begin(), scene.truth.end(),
            [](const GroundTruthBox& x, const GroundTruthBox& y) {
              if (x.frame_seq != y.frame_seq) return x.frame_seq < y.frame_seq;
              return x.track_id < y.track_id;
            });
  return scene;
}

void save_events_jsonl(const std::vector<BehaviorEvent>& events, std::ostream& out) {
  for (const BehaviorEvent& e : events) {
    nlohmann::json j{{"kind", to_string(e.kind)},
                     {"first_seq", e.first_seq},
                     {"last_seq", e.last_seq},
                     {"class_label", e.class_label},
                     {"zone_id", e.zone_id},
                     {"bbox", {e.bbox.x_min(), e.bbox.y_min(), e.bbox.x_max(), e.bbox.y_max()}},
                     {"evidence", e.evidence}};
    out << j.dump() << '\n';
  }
}

void save_events_jsonl_file(const std::vector<BehaviorEvent>& events,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_events_jsonl(events, out);
}

ScenePaths save_scene(const Scene& scene, const std::string& dir) {
  std::filesystem::create_directories(dir);
  ScenePaths paths;

  paths.video = dir + "/video.y4m";
  {
    std::ofstream out(paths.video, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + paths.video);
    Y4mHeader header;
    header.width = scene.spec.width;
    header.height = scene.spec.height;
    header.fps_num = scene.spec.fps;
    header.fps_den = 1;
    Y4mWriter writer(out, header);
    for (const auto& f : scene.frames) writer.write(gray_to_ycbcr420(f));
  }

  paths.truth_xml = dir + "/truth.xml";
  cvat_write_file(scene.truth, paths.truth_xml);
  paths.motion_json = dir + "/motion.json";
  save_truth_motion_file(scene.truth, paths.motion_json);
  paths.expected_events = dir + "/expected_events.jsonl";
  save_events_jsonl_file(scene.expected_events, paths.expected_events);

  if (scene.spec.zones) {
    paths.zone_raster = dir + "/zones.pgm";
    paths.zone_meta = dir + "/zones.json";
    save_zone_map(*scene.spec.zones, paths.zone_raster, paths.zone_meta);
  }
  return paths;
}

std::map<std::int64_t, std::vector<Detection>> perturb_detections(
    const std::vector<GroundTruthBox>& truth, int width, int height,
    const PerturbParams& params) {
  if (params.fp_rate < 0 || params.fp_rate > 1 || params.miss_rate < 0 ||
      params.miss_rate > 1)
    throw std::invalid_argument("perturb_detections: rates must be in [0,1]");
  if (params.jitter_px < 0)
    throw std::invalid_argument("perturb_detections: jitter must be >= 0");

  Rng rng(params.seed);
  auto confidence = [&]() {
    return params.conf_model == ConfModel::kConstantOne ? 1.0 : rng.uniform(0.5, 1.0);
  };

  std::map<std::int64_t, std::vector<GroundTruthBox>> by_frame;
  for (const auto& t : truth) by_frame[t.frame_seq].push_back(t);

  std::map<std::int64_t, std::vector<Detection>> out;
  for (const auto& [seq, truths] : by_frame) {
    auto& dets = out[seq];
    for (const auto& t : truths) {
      bool miss = rng.uniform() < params.miss_rate;
      double conf = confidence();  // drawn either way: stream independent of outcomes
      if (!miss) {
        double jx = params.jitter_px > 0 ? rng.uniform(-params.jitter_px, params.jitter_px) : 0.0;
        double jy = params.jitter_px > 0 ? rng.uniform(-params.jitter_px, params.jitter_px) : 0.0;
        dets.push_back(Detection{seq, t.bbox.translated(jx, jy), t.class_label,
                                 conf, 1.0, std::nullopt});
      }
      if (rng.uniform() < params.fp_rate) {
        double bw = t.bbox.width(), bh = t.bbox.height();
        for (int attempt = 0; attempt < 1000; ++attempt) {
          double x0 = rng.uniform(0.0, std::max(1.0, width - bw));
          double y0 = rng.uniform(0.0, std::max(1.0, height - bh));
          BBox fp(x0, y0, x0 + bw, y0 + bh);
          bool clear = true;
          for (const auto& other : truths)
            if (iou(fp, other.bbox) >= 0.05) {
              clear = false;
              break;
            }
          if (clear) {
            dets.push_back(Detection{seq, fp, t.class_label, confidence(), 1.0,
                                     std::nullopt});
            break;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace traffic
