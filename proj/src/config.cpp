#include "traffic/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "json.hpp"
#include "traffic/detect.hpp"
#include "traffic/sink.hpp"
#include "traffic/stages.hpp"
#include "traffic/video_io.hpp"

namespace traffic {

using nlohmann::json;

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::ostringstream out;
  out << "invalid configuration (" << problems.size() << " problem"
      << (problems.size() == 1 ? "" : "s") << "):";
  for (const auto& p : problems) out << "\n  - " << p;
  return out.str();
}

std::string where(const std::string& scope, const char* key) {
  return scope.empty() ? key : scope + "." + key;
}

void check_keys(const json& j, const std::string& scope,
                std::initializer_list<const char*> allowed,
                std::vector<std::string>& problems) {
  for (const auto& item : j.items()) {
    bool known = std::any_of(allowed.begin(), allowed.end(),
                             [&](const char* a) { return item.key() == a; });
    if (!known) {
      problems.push_back((scope.empty() ? "unknown key \"" : scope + ": unknown key \"") +
                         item.key() + "\"");
    }
  }
}

int get_int(const json& j, const char* key, int fallback, const std::string& scope,
            std::vector<std::string>& problems) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned()) {
    problems.push_back(where(scope, key) + " must be an integer");
    return fallback;
  }
  return v.get<int>();
}

double get_double(const json& j, const char* key, double fallback,
                  const std::string& scope, std::vector<std::string>& problems) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_number()) {
    problems.push_back(where(scope, key) + " must be a number");
    return fallback;
  }
  return v.get<double>();
}

bool get_bool(const json& j, const char* key, bool fallback, const std::string& scope,
              std::vector<std::string>& problems) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_boolean()) {
    problems.push_back(where(scope, key) + " must be a boolean");
    return fallback;
  }
  return v.get<bool>();
}

std::string get_str(const json& j, const char* key, std::string fallback,
                    const std::string& scope, std::vector<std::string>& problems) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (!v.is_string()) {
    problems.push_back(where(scope, key) + " must be a string");
    return fallback;
  }
  return v.get<std::string>();
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback,
                      const std::string& scope, std::vector<std::string>& problems) {
  if (!j.contains(key)) return fallback;
  const json& v = j.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  problems.push_back(where(scope, key) + " must be a non-negative integer");
  return fallback;
}

FlowParams flow_params_from_json(const json& j, const std::string& scope,
                                 std::vector<std::string>& problems) {
  FlowParams p;
  p.max_corners = get_int(j, "max_corners", p.max_corners, scope, problems);
  p.quality_level = get_double(j, "quality_level", p.quality_level, scope, problems);
  p.min_distance = get_double(j, "min_distance", p.min_distance, scope, problems);
  p.window = get_int(j, "window", p.window, scope, problems);
  p.pyramid_levels = get_int(j, "pyramid_levels", p.pyramid_levels, scope, problems);
  p.max_iterations = get_int(j, "max_iterations", p.max_iterations, scope, problems);
  p.epsilon = get_double(j, "epsilon", p.epsilon, scope, problems);
  return p;
}

BehaviorParams behavior_params_from_json(const json& j, const std::string& scope,
                                         std::vector<std::string>& problems) {
  BehaviorParams p;
  p.wrong_way_angle_deg =
      get_double(j, "wrong_way_angle_deg", p.wrong_way_angle_deg, scope, problems);
  p.min_speed_px = get_double(j, "min_speed_px", p.min_speed_px, scope, problems);
  p.persist_frames = get_int(j, "persist_frames", p.persist_frames, scope, problems);
  p.stop_speed_px = get_double(j, "stop_speed_px", p.stop_speed_px, scope, problems);
  p.stop_frames = get_int(j, "stop_frames", p.stop_frames, scope, problems);
  p.assoc_iou = get_double(j, "assoc_iou", p.assoc_iou, scope, problems);
  return p;
}

std::vector<ZoneRect> zone_rects_from_json(const json& arr, const std::string& scope,
                                           std::vector<std::string>& problems) {
  std::vector<ZoneRect> rects;
  if (!arr.is_array()) {
    problems.push_back(scope + " must be an array");
    return rects;
  }
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& r = arr[i];
    std::string rs = scope + "[" + std::to_string(i) + "]";
    if (!r.is_object()) {
      problems.push_back(rs + " must be an object");
      continue;
    }
    check_keys(r, rs, {"zone_id", "x_min", "y_min", "x_max", "y_max"}, problems);
    ZoneRect rect;
    rect.zone_id = get_int(r, "zone_id", 0, rs, problems);
    rect.x_min = get_double(r, "x_min", 0.0, rs, problems);
    rect.y_min = get_double(r, "y_min", 0.0, rs, problems);
    rect.x_max = get_double(r, "x_max", 0.0, rs, problems);
    rect.y_max = get_double(r, "y_max", 0.0, rs, problems);
    rects.push_back(rect);
  }
  return rects;
}

std::vector<ZoneMeta> zone_metas_from_json(const json& arr, const std::string& scope,
                                           std::vector<std::string>& problems) {
  std::vector<ZoneMeta> metas;
  if (!arr.is_array()) {
    problems.push_back(scope + " must be an array of zone metadata objects");
    return metas;
  }
  try {
    metas = parse_zone_metas(json{{"zones", arr}}.dump());
  } catch (const std::exception& e) {
    problems.push_back(scope + ": " + e.what());
  }
  return metas;
}

ZonesConfig zones_from_json(const json& j, const std::string& scope,
                            std::vector<std::string>& problems) {
  ZonesConfig z;
  check_keys(j, scope, {"raster", "meta", "rects", "metas"}, problems);
  z.enabled = true;
  z.raster_path = get_str(j, "raster", "", scope, problems);
  z.meta_path = get_str(j, "meta", "", scope, problems);
  if (j.contains("rects")) z.rects = zone_rects_from_json(j.at("rects"), scope + ".rects", problems);
  if (j.contains("metas")) z.metas = zone_metas_from_json(j.at("metas"), scope + ".metas", problems);
  return z;
}

json parse_document(const std::string& text, const std::string& origin) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw ConfigError({origin + ": expected a JSON object"});
    return j;
  } catch (const json::exception& e) {
    throw ConfigError({origin + ": " + e.what()});
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError({"cannot open config file: " + path});
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : std::runtime_error(join_problems(problems)), problems_(std::move(problems)) {}

RunConfig parse_run_config(const std::string& json_text, const std::string& origin) {
  json j = parse_document(json_text, origin);
  std::vector<std::string> problems;
  RunConfig cfg;

  check_keys(j, "",
             {"camera_id", "input", "output_dir", "annotated_video", "queue_capacity",
              "detector", "flow", "zones", "behaviors", "render"},
             problems);

  cfg.camera_id = get_str(j, "camera_id", cfg.camera_id, "", problems);
  cfg.output_dir = get_str(j, "output_dir", cfg.output_dir, "", problems);
  cfg.annotated_video = get_bool(j, "annotated_video", cfg.annotated_video, "", problems);
  cfg.queue_capacity = get_int(j, "queue_capacity", cfg.queue_capacity, "", problems);

  if (j.contains("input")) {
    const json& in = j.at("input");
    if (!in.is_object()) {
      problems.push_back("input must be an object");
    } else {
      check_keys(in, "input", {"path", "format"}, problems);
      cfg.input_path = get_str(in, "path", "", "input", problems);
      cfg.input_format = get_str(in, "format", cfg.input_format, "input", problems);
    }
  }

  if (j.contains("detector")) {
    const json& d = j.at("detector");
    if (!d.is_object()) {
      problems.push_back("detector must be an object");
    } else {
      check_keys(d, "detector", {"kind", "path", "workers", "min_area", "alpha", "k"},
                 problems);
      std::string kind = get_str(d, "kind", "none", "detector", problems);
      if (kind == "none") {
        cfg.detector.kind = DetectorKind::kNone;
      } else if (kind == "file") {
        cfg.detector.kind = DetectorKind::kFile;
      } else if (kind == "blob") {
        cfg.detector.kind = DetectorKind::kBlob;
      } else {
        problems.push_back("detector.kind must be \"none\", \"file\" or \"blob\", got \"" +
                           kind + "\"");
      }
      cfg.detector.path = get_str(d, "path", "", "detector", problems);
      cfg.detector.workers = get_int(d, "workers", 1, "detector", problems);
      cfg.detector.min_area = get_int(d, "min_area", cfg.detector.min_area, "detector", problems);
      cfg.detector.alpha = get_double(d, "alpha", cfg.detector.alpha, "detector", problems);
      cfg.detector.k = get_double(d, "k", cfg.detector.k, "detector", problems);
    }
  }

  if (j.contains("flow")) {
    const json& f = j.at("flow");
    if (!f.is_object()) {
      problems.push_back("flow must be an object");
    } else {
      check_keys(f, "flow",
                 {"enabled", "max_corners", "quality_level", "min_distance", "window",
                  "pyramid_levels", "max_iterations", "epsilon", "min_support"},
                 problems);
      cfg.flow.enabled = get_bool(f, "enabled", true, "flow", problems);
      cfg.flow.params = flow_params_from_json(f, "flow", problems);
      cfg.flow.min_support = get_int(f, "min_support", cfg.flow.min_support, "flow", problems);
    }
  }

  if (j.contains("zones")) {
    const json& z = j.at("zones");
    if (!z.is_object()) {
      problems.push_back("zones must be an object");
    } else {
      cfg.zones = zones_from_json(z, "zones", problems);
    }
  }

  if (j.contains("behaviors")) {
    const json& b = j.at("behaviors");
    if (!b.is_object()) {
      problems.push_back("behaviors must be an object");
    } else {
      check_keys(b, "behaviors",
                 {"enabled", "wrong_way_angle_deg", "min_speed_px", "persist_frames",
                  "stop_speed_px", "stop_frames", "assoc_iou"},
                 problems);
      cfg.behaviors.enabled = get_bool(b, "enabled", true, "behaviors", problems);
      cfg.behaviors.params = behavior_params_from_json(b, "behaviors", problems);
    }
  }

  if (j.contains("render")) {
    const json& r = j.at("render");
    if (!r.is_object()) {
      problems.push_back("render must be an object");
    } else {
      check_keys(r, "render", {"workers"}, problems);
      cfg.render_workers = get_int(r, "workers", cfg.render_workers, "render", problems);
    }
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path), path);
}

void RunConfig::validate() const {
  namespace fs = std::filesystem;
  std::vector<std::string> problems;

  if (camera_id.empty()) problems.push_back("camera_id must not be empty");
  if (output_dir.empty()) problems.push_back("output_dir must not be empty");
  if (queue_capacity < 1) problems.push_back("queue_capacity must be >= 1");
  if (render_workers < 1) problems.push_back("render.workers must be >= 1");

  if (input_path.empty()) {
    problems.push_back("input.path is required");
  } else if (!fs::exists(input_path)) {
    problems.push_back("input.path does not exist: " + input_path);
  }
  if (input_format != "y4m") {
    problems.push_back("input.format must be \"y4m\", got \"" + input_format + "\"");
  }

  switch (detector.kind) {
    case DetectorKind::kNone:
      break;
    case DetectorKind::kFile:
      if (detector.path.empty()) {
        problems.push_back("detector.path is required for the file detector");
      } else if (!fs::exists(detector.path)) {
        problems.push_back("detector.path does not exist: " + detector.path);
      }
      if (detector.workers < 1) problems.push_back("detector.workers must be >= 1");
      break;
    case DetectorKind::kBlob:
      if (detector.min_area < 1) problems.push_back("detector.min_area must be >= 1");
      if (!(detector.alpha > 0.0) || detector.alpha > 1.0)
        problems.push_back("detector.alpha must be in (0, 1]");
      if (!(detector.k > 0.0)) problems.push_back("detector.k must be > 0");
      if (detector.workers != 1)
        problems.push_back("detector.workers: the blob detector is stateful and single-worker");
      break;
  }

  if (flow.enabled) {
    if (detector.kind == DetectorKind::kNone)
      problems.push_back("flow requires a detector stage (motion is estimated per detection)");
    try {
      flow.params.validate();
    } catch (const std::exception& e) {
      problems.push_back(std::string("flow: ") + e.what());
    }
    if (flow.min_support < 1) problems.push_back("flow.min_support must be >= 1");
  }

  if (zones.enabled) {
    const bool file_based = !zones.raster_path.empty() || !zones.meta_path.empty();
    if (file_based && zones.inline_zones()) {
      problems.push_back("zones: give either raster+meta files or inline rects+metas, not both");
    } else if (file_based) {
      if (zones.raster_path.empty() || zones.meta_path.empty()) {
        problems.push_back("zones: raster and meta must be given together");
      } else {
        if (!fs::exists(zones.raster_path))
          problems.push_back("zones.raster does not exist: " + zones.raster_path);
        if (!fs::exists(zones.meta_path))
          problems.push_back("zones.meta does not exist: " + zones.meta_path);
      }
    } else if (zones.inline_zones()) {
      if (zones.metas.empty()) {
        problems.push_back("zones.metas must declare every zone_id the rects use");
      } else {
        // dry run on an empty raster validates ids, directions, duplicates
        try {
          rasterize_zone_rects({}, zones.metas, 2, 2);
        } catch (const std::exception& e) {
          problems.push_back(std::string("zones.metas: ") + e.what());
        }
      }
      for (std::size_t i = 0; i < zones.rects.size(); ++i) {
        const ZoneRect& r = zones.rects[i];
        std::string rs = "zones.rects[" + std::to_string(i) + "]";
        if (r.zone_id < 1 || r.zone_id > 255)
          problems.push_back(rs + ": zone_id must be in [1,255]");
        else if (std::none_of(zones.metas.begin(), zones.metas.end(),
                              [&](const ZoneMeta& m) { return m.zone_id == r.zone_id; }))
          problems.push_back(rs + ": zone_id " + std::to_string(r.zone_id) +
                             " has no metadata entry");
        if (!(r.x_min < r.x_max) || !(r.y_min < r.y_max))
          problems.push_back(rs + ": requires x_min < x_max and y_min < y_max");
      }
    } else {
      problems.push_back("zones: give raster+meta files or inline rects+metas");
    }
  }

  if (behaviors.enabled) {
    if (!zones.enabled) problems.push_back("behaviors require zones");
    if (detector.kind == DetectorKind::kNone) problems.push_back("behaviors require a detector");
    if (!flow.enabled) problems.push_back("behaviors require flow (rules read motion)");
    try {
      behaviors.params.validate();
    } catch (const std::exception& e) {
      problems.push_back(std::string("behaviors: ") + e.what());
    }
  }

  if (!problems.empty()) throw ConfigError(std::move(problems));
}

ZoneMap rasterize_zone_rects(const std::vector<ZoneRect>& rects,
                             std::vector<ZoneMeta> metas, int width, int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("zone rects: frame dims must be positive");
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(width) * height, 0);
  for (const ZoneRect& r : rects) {
    if (r.zone_id < 1 || r.zone_id > 255)
      throw std::invalid_argument("zone rect: zone_id must be in [1,255], got " +
                                  std::to_string(r.zone_id));
    const int x0 = std::max(0, round_px(r.x_min));
    const int y0 = std::max(0, round_px(r.y_min));
    const int x1 = std::min(width, round_px(r.x_max));
    const int y1 = std::min(height, round_px(r.y_max));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        raster[static_cast<std::size_t>(y) * width + x] =
            static_cast<std::uint8_t>(r.zone_id);
      }
    }
  }
  return make_zone_map(std::move(raster), width, height, std::move(metas));
}

SceneSpec parse_scene_spec(const std::string& json_text, const std::string& origin) {
  json j = parse_document(json_text, origin);
  std::vector<std::string> problems;
  SceneSpec spec;

  check_keys(j, "",
             {"width", "height", "frame_count", "fps", "background_gray",
              "textured_background", "background_amp", "noise_sigma", "seed", "actors",
              "zones", "behavior"},
             problems);

  spec.width = get_int(j, "width", spec.width, "", problems);
  spec.height = get_int(j, "height", spec.height, "", problems);
  spec.frame_count = get_int(j, "frame_count", spec.frame_count, "", problems);
  spec.fps = get_int(j, "fps", spec.fps, "", problems);
  spec.background_gray = get_int(j, "background_gray", spec.background_gray, "", problems);
  spec.textured_background =
      get_bool(j, "textured_background", spec.textured_background, "", problems);
  spec.background_amp = get_int(j, "background_amp", spec.background_amp, "", problems);
  spec.noise_sigma = get_double(j, "noise_sigma", spec.noise_sigma, "", problems);
  spec.seed = get_u64(j, "seed", spec.seed, "", problems);

  if (j.contains("actors")) {
    const json& actors = j.at("actors");
    if (!actors.is_array()) {
      problems.push_back("actors must be an array");
    } else {
      for (std::size_t i = 0; i < actors.size(); ++i) {
        const json& a = actors[i];
        std::string as = "actors[" + std::to_string(i) + "]";
        if (!a.is_object()) {
          problems.push_back(as + " must be an object");
          continue;
        }
        check_keys(a, as,
                   {"class_label", "width", "height", "waypoints", "spawn_frame",
                    "base_gray", "texture_amp", "texture_seed"},
                   problems);
        ActorSpec actor;
        actor.class_label = get_str(a, "class_label", actor.class_label, as, problems);
        actor.width = get_int(a, "width", actor.width, as, problems);
        actor.height = get_int(a, "height", actor.height, as, problems);
        actor.spawn_frame = get_int(a, "spawn_frame", actor.spawn_frame, as, problems);
        actor.base_gray = get_int(a, "base_gray", actor.base_gray, as, problems);
        actor.texture_amp = get_int(a, "texture_amp", actor.texture_amp, as, problems);
        actor.texture_seed = get_u64(a, "texture_seed", actor.texture_seed, as, problems);
        if (a.contains("waypoints")) {
          const json& wps = a.at("waypoints");
          if (!wps.is_array()) {
            problems.push_back(as + ".waypoints must be an array");
          } else {
            for (std::size_t w = 0; w < wps.size(); ++w) {
              const json& wp = wps[w];
              std::string ws = as + ".waypoints[" + std::to_string(w) + "]";
              if (!wp.is_object()) {
                problems.push_back(ws + " must be an object");
                continue;
              }
              check_keys(wp, ws, {"pos", "speed", "dwell"}, problems);
              Waypoint out;
              if (!wp.contains("pos") || !wp.at("pos").is_array() ||
                  wp.at("pos").size() != 2 || !wp.at("pos")[0].is_number() ||
                  !wp.at("pos")[1].is_number()) {
                problems.push_back(ws + ".pos must be [x, y]");
              } else {
                out.pos = Vec2{wp.at("pos")[0].get<double>(), wp.at("pos")[1].get<double>()};
              }
              out.speed = get_double(wp, "speed", out.speed, ws, problems);
              out.dwell = get_int(wp, "dwell", out.dwell, ws, problems);
              actor.waypoints.push_back(out);
            }
          }
        }
        spec.actors.push_back(std::move(actor));
      }
    }
  }

  if (j.contains("zones")) {
    const json& z = j.at("zones");
    if (!z.is_object()) {
      problems.push_back("zones must be an object");
    } else {
      check_keys(z, "zones", {"rects", "metas"}, problems);
      const std::size_t before = problems.size();
      auto rects = z.contains("rects")
                       ? zone_rects_from_json(z.at("rects"), "zones.rects", problems)
                       : std::vector<ZoneRect>{};
      auto metas = z.contains("metas")
                       ? zone_metas_from_json(z.at("metas"), "zones.metas", problems)
                       : std::vector<ZoneMeta>{};
      if (problems.size() == before) {
        try {
          spec.zones = rasterize_zone_rects(rects, std::move(metas), spec.width, spec.height);
        } catch (const std::exception& e) {
          problems.push_back(std::string("zones: ") + e.what());
        }
      }
    }
  }

  if (j.contains("behavior")) {
    const json& b = j.at("behavior");
    if (!b.is_object()) {
      problems.push_back("behavior must be an object");
    } else {
      check_keys(b, "behavior",
                 {"wrong_way_angle_deg", "min_speed_px", "persist_frames", "stop_speed_px",
                  "stop_frames", "assoc_iou"},
                 problems);
      spec.behavior = behavior_params_from_json(b, "behavior", problems);
    }
  }

  if (problems.empty()) {
    try {
      spec.validate();
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    for (auto& p : problems) p = origin + ": " + p;
    throw ConfigError(std::move(problems));
  }
  return spec;
}

SceneSpec load_scene_spec(const std::string& path) {
  return parse_scene_spec(read_file(path), path);
}

EvalConfig parse_eval_config(const std::string& json_text, const std::string& origin) {
  json j = parse_document(json_text, origin);
  std::vector<std::string> problems;
  EvalConfig cfg;

  check_keys(j, "",
             {"iou_threshold", "objectness_grid", "label_grid", "confidence_grid",
              "class_mapping"},
             problems);
  cfg.iou_threshold = get_double(j, "iou_threshold", cfg.iou_threshold, "", problems);

  auto grid = [&](const char* key, std::vector<double>& dst) {
    if (!j.contains(key)) return;
    const json& g = j.at(key);
    if (!g.is_array() || g.empty() ||
        !std::all_of(g.begin(), g.end(), [](const json& v) { return v.is_number(); })) {
      problems.push_back(std::string(key) + " must be a non-empty array of numbers");
      return;
    }
    dst.clear();
    for (const json& v : g) dst.push_back(v.get<double>());
  };
  grid("objectness_grid", cfg.objectness_grid);
  grid("label_grid", cfg.label_grid);
  grid("confidence_grid", cfg.confidence_grid);

  if (j.contains("class_mapping")) {
    const json& m = j.at("class_mapping");
    if (!m.is_object() ||
        !std::all_of(m.begin(), m.end(), [](const json& v) { return v.is_string(); })) {
      problems.push_back("class_mapping must be an object of string -> string");
    } else {
      for (const auto& item : m.items())
        cfg.class_mapping[item.key()] = item.value().get<std::string>();
    }
  }

  if (problems.empty()) {
    try {
      cfg.validate();
    } catch (const std::exception& e) {
      problems.push_back(e.what());
    }
  }
  if (!problems.empty()) {
    for (auto& p : problems) p = origin + ": " + p;
    throw ConfigError(std::move(problems));
  }
  return cfg;
}

EvalConfig load_eval_config(const std::string& path) {
  return parse_eval_config(read_file(path), path);
}

RunStats run_configured_pipeline(const RunConfig& cfg) {
  cfg.validate();

  auto input = std::make_shared<std::ifstream>(cfg.input_path, std::ios::binary);
  if (!*input) throw ConfigError({"cannot open input: " + cfg.input_path});
  auto reader = std::make_shared<Y4mReader>(*input);
  const Y4mHeader& hdr = reader->header();

  std::shared_ptr<const ZoneMap> zone_map;
  if (cfg.zones.enabled) {
    try {
      ZoneMap zm = cfg.zones.inline_zones()
                       ? rasterize_zone_rects(cfg.zones.rects, cfg.zones.metas,
                                              hdr.width, hdr.height)
                       : load_zone_map(cfg.zones.raster_path, cfg.zones.meta_path,
                                       hdr.width, hdr.height);
      zone_map = std::make_shared<const ZoneMap>(std::move(zm));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError({std::string("zones: ") + e.what()});
    }
  }

  PipelineSpec spec;
  spec.source = [input, reader]() { return reader->next(); };
  spec.sink_queue_capacity = cfg.queue_capacity;

  auto add_stage = [&](const std::string& name, StageFn task, int workers) {
    StageSpec s;
    s.name = name;
    s.task = std::move(task);
    s.worker_count = workers;
    s.queue_capacity = cfg.queue_capacity;
    spec.stages.push_back(std::move(s));
  };

  switch (cfg.detector.kind) {
    case DetectorKind::kNone:
      break;
    case DetectorKind::kFile: {
      auto dets = std::make_shared<const std::map<std::int64_t, std::vector<Detection>>>(
          load_detections_file(cfg.detector.path));
      add_stage("detect", make_file_detect_stage(std::move(dets)), cfg.detector.workers);
      break;
    }
    case DetectorKind::kBlob:
      add_stage("detect",
                make_blob_detect_stage(cfg.detector.alpha, cfg.detector.k,
                                       cfg.detector.min_area),
                1);
      break;
  }

  if (cfg.flow.enabled) {
    add_stage("flow", make_flow_stage(cfg.flow.params, cfg.flow.min_support), 1);
  }
  if (cfg.behaviors.enabled) {
    add_stage("behaviors", make_behavior_stage(*zone_map, cfg.behaviors.params), 1);
  }
  if (cfg.annotated_video) {
    add_stage("render", make_render_stage(zone_map), cfg.render_workers);
  }

  std::filesystem::create_directories(cfg.output_dir);
  auto logger = std::make_shared<StreamLogger>(cfg.output_dir, cfg.camera_id);
  spec.sinks.push_back(make_log_sink(std::move(logger)));

  if (cfg.annotated_video) {
    Y4mHeader out_hdr = hdr;
    out_hdr.colorspace = "C420jpeg";
    out_hdr.extras.clear();
    auto video = std::make_shared<VideoSink>(cfg.output_dir + "/annotated.y4m", out_hdr);
    spec.sinks.push_back([video](const FrameEnvelope& env) { (*video)(env); });
  }

  Pipeline pipeline = Pipeline::build(std::move(spec));
  return pipeline.run();
}

}  // namespace traffic
