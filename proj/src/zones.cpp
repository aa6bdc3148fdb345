#include "traffic/zones.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "traffic/video_io.hpp"

namespace traffic {

using nlohmann::json;

std::string to_string(Surface s) {
  switch (s) {
    case Surface::ROAD: return "ROAD";
    case Surface::SIDEWALK: return "SIDEWALK";
    case Surface::CROSSWALK: return "CROSSWALK";
    case Surface::OTHER: return "OTHER";
  }
  return "OTHER";
}

std::optional<Surface> surface_from_string(const std::string& s) {
  if (s == "ROAD") return Surface::ROAD;
  if (s == "SIDEWALK") return Surface::SIDEWALK;
  if (s == "CROSSWALK") return Surface::CROSSWALK;
  if (s == "OTHER") return Surface::OTHER;
  return std::nullopt;
}

ZoneMap make_zone_map(std::vector<std::uint8_t> raster, int width, int height,
                      std::vector<ZoneMeta> metas) {
  if (width <= 0 || height <= 0 ||
      raster.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("zone map: raster size does not match dims");

  ZoneMap map;
  map.width = width;
  map.height = height;
  for (auto& m : metas) {
    if (m.zone_id <= 0 || m.zone_id > 255)
      throw std::invalid_argument("zone map: zone_id must be in [1,255], got " +
                                  std::to_string(m.zone_id));
    if (m.allowed_direction) {
      double n = std::hypot(m.allowed_direction->x, m.allowed_direction->y);
      if (std::abs(n - 1.0) > 1e-6)
        throw std::invalid_argument("zone " + std::to_string(m.zone_id) +
                                    ": allowed_direction must be a unit vector");
    }
    int id = m.zone_id;
    if (!map.zones.emplace(id, std::move(m)).second)
      throw std::invalid_argument("zone map: duplicate zone_id " + std::to_string(id));
  }

  std::set<int> orphans;
  for (std::uint8_t v : raster)
    if (v != 0 && !map.zones.count(v)) orphans.insert(v);
  if (!orphans.empty()) {
    std::ostringstream msg;
    msg << "zone map: raster ids without metadata:";
    for (int id : orphans) msg << ' ' << id;
    throw std::invalid_argument(msg.str());
  }

  map.raster = std::make_shared<const std::vector<std::uint8_t>>(std::move(raster));
  return map;
}

namespace {

ZoneMeta meta_from_json(const json& j) {
  ZoneMeta m;
  m.zone_id = j.at("zone_id").get<int>();
  auto s = surface_from_string(j.at("surface").get<std::string>());
  if (!s)
    throw std::invalid_argument("zone " + std::to_string(m.zone_id) +
                                ": unknown surface '" +
                                j.at("surface").get<std::string>() + "'");
  m.surface = *s;
  if (j.contains("allowed_direction") && !j.at("allowed_direction").is_null()) {
    const auto& d = j.at("allowed_direction");
    if (!d.is_array() || d.size() != 2)
      throw std::invalid_argument("zone " + std::to_string(m.zone_id) +
                                  ": allowed_direction must be [dx, dy]");
    m.allowed_direction = Vec2{d[0].get<double>(), d[1].get<double>()};
  }
  if (j.contains("no_stopping")) m.no_stopping = j.at("no_stopping").get<bool>();
  if (j.contains("prohibited_classes"))
    for (const auto& c : j.at("prohibited_classes"))
      m.prohibited_classes.insert(c.get<std::string>());
  return m;
}

}  // namespace

std::vector<ZoneMeta> parse_zone_metas(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("zone metadata: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("zones") || !doc.at("zones").is_array())
    throw std::runtime_error("zone metadata: expected an object with a \"zones\" array");
  std::vector<ZoneMeta> metas;
  for (const auto& j : doc.at("zones")) metas.push_back(meta_from_json(j));
  return metas;
}

ZoneMap load_zone_map(const std::string& raster_path, const std::string& meta_path,
                      int width, int height) {
  Frame raster = pgm_read_file(raster_path);
  if (raster.width() != width || raster.height() != height)
    throw std::invalid_argument(
        "zone map: raster is " + std::to_string(raster.width()) + "x" +
        std::to_string(raster.height()) + ", stream is " + std::to_string(width) +
        "x" + std::to_string(height));

  std::ifstream in(meta_path);
  if (!in) throw std::runtime_error("cannot open zone metadata: " + meta_path);
  std::ostringstream buf;
  buf << in.rdbuf();

  std::vector<ZoneMeta> metas;
  try {
    metas = parse_zone_metas(buf.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(meta_path + ": " + e.what());
  }

  return make_zone_map(std::vector<std::uint8_t>(raster.data().begin(), raster.data().end()),
                       width, height, std::move(metas));
}

void save_zone_map(const ZoneMap& map, const std::string& raster_path,
                   const std::string& meta_path) {
  Frame raster(0, 0.0, map.width, map.height, PixelFormat::GRAY8, *map.raster);
  pgm_write_file(raster, raster_path);

  json zones = json::array();
  for (const auto& [id, m] : map.zones) {
    json j{{"zone_id", id}, {"surface", to_string(m.surface)},
           {"no_stopping", m.no_stopping}};
    if (m.allowed_direction)
      j["allowed_direction"] = {m.allowed_direction->x, m.allowed_direction->y};
    json classes = json::array();
    for (const auto& c : m.prohibited_classes) classes.push_back(c);
    j["prohibited_classes"] = classes;
    zones.push_back(j);
  }
  std::ofstream out(meta_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write zone metadata: " + meta_path);
  out << json{{"zones", zones}}.dump(2) << '\n';
}

int zone_at(const ZoneMap& map, double x, double y) {
  int xi = round_px(x);
  int yi = round_px(y);
  if (xi < 0 || yi < 0 || xi >= map.width || yi >= map.height) return 0;
  return (*map.raster)[static_cast<std::size_t>(yi) * map.width + xi];
}

int zone_of_detection(const ZoneMap& map, const Detection& det) {
  Vec2 a = anchor_point(det.bbox);
  return zone_at(map, a.x, a.y);
}

}  // namespace traffic
