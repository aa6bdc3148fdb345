#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "traffic/geometry.hpp"
#include "traffic/types.hpp"

namespace traffic {

enum class Surface { ROAD, SIDEWALK, CROSSWALK, OTHER };

std::string to_string(Surface s);
std::optional<Surface> surface_from_string(const std::string& s);

struct ZoneMeta {
  int zone_id = 0;
  Surface surface = Surface::OTHER;
  // Unit vector in the shared y-up angle convention: (1,0) is rightward on
  // screen, (0,1) is up-screen.
  std::optional<Vec2> allowed_direction;
  bool no_stopping = false;
  std::set<std::string> prohibited_classes;
};

// Immutable after construction; shared read-only across workers. Raster id
// 0 means unlabeled: rules never fire there.
struct ZoneMap {
  int width = 0;
  int height = 0;
  std::shared_ptr<const std::vector<std::uint8_t>> raster;
  std::map<int, ZoneMeta> zones;
};

// Validates dims, unit directions, and that every nonzero raster id has a
// metadata entry (the error names all missing ids at once).
ZoneMap make_zone_map(std::vector<std::uint8_t> raster, int width, int height,
                      std::vector<ZoneMeta> metas);

// Parses a metadata document: an object with a top-level "zones" array. The
// same shape load_zone_map reads from disk; exposed so configs can inline it.
std::vector<ZoneMeta> parse_zone_metas(const std::string& json_text);

// Raster from a PGM (P5, maxval 255), metadata from a JSON document with a
// top-level "zones" array.
ZoneMap load_zone_map(const std::string& raster_path, const std::string& meta_path,
                      int width, int height);
void save_zone_map(const ZoneMap& map, const std::string& raster_path,
                   const std::string& meta_path);

// Total: any finite (x,y) yields an id, 0 when out of bounds or unlabeled.
// Coordinates round half away from zero.
int zone_at(const ZoneMap& map, double x, double y);

// Zone under the detection's bottom-center anchor.
int zone_of_detection(const ZoneMap& map, const Detection& det);

}  // namespace traffic
