#include "traffic/cvat.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "traffic/xml.hpp"

namespace traffic {

namespace {

using nlohmann::json;

[[noreturn]] void node_error(const XmlNode& n, const std::string& what) {
  throw std::runtime_error("cvat line " + std::to_string(n.line) + ": " + what);
}

const std::string& require_attr(const XmlNode& n, const char* name) {
  const std::string* v = n.attr(name);
  if (!v) node_error(n, "<" + n.name + "> missing attribute '" + name + "'");
  return *v;
}

double to_double(const XmlNode& n, const char* name, const std::string& raw) {
  char* end = nullptr;
  double v = std::strtod(raw.c_str(), &end);
  if (end != raw.c_str() + raw.size() || raw.empty())
    node_error(n, std::string("attribute '") + name + "' is not a number: '" + raw + "'");
  return v;
}

long to_long(const XmlNode& n, const char* name, const std::string& raw) {
  long v = 0;
  auto [p, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
  if (ec != std::errc() || p != raw.data() + raw.size())
    node_error(n, std::string("attribute '") + name + "' is not an integer: '" + raw + "'");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace

std::vector<GroundTruthBox> parse_cvat(const std::string& xml_text) {
  XmlNode root = xml_parse(xml_text);
  if (root.name != "annotations")
    throw std::runtime_error("cvat line " + std::to_string(root.line) +
                             ": expected <annotations> root, got <" + root.name + ">");
  std::vector<GroundTruthBox> out;
  for (const XmlNode* track : root.children_named("track")) {
    int id = static_cast<int>(to_long(*track, "id", require_attr(*track, "id")));
    const std::string& label = require_attr(*track, "label");
    for (const XmlNode* box : track->children_named("box")) {
      const std::string* outside = box->attr("outside");
      if (outside && *outside == "1") continue;
      long frame = to_long(*box, "frame", require_attr(*box, "frame"));
      double xtl = to_double(*box, "xtl", require_attr(*box, "xtl"));
      double ytl = to_double(*box, "ytl", require_attr(*box, "ytl"));
      double xbr = to_double(*box, "xbr", require_attr(*box, "xbr"));
      double ybr = to_double(*box, "ybr", require_attr(*box, "ybr"));
      try {
        out.push_back(GroundTruthBox{frame, BBox(xtl, ytl, xbr, ybr), label, id,
                                     std::nullopt});
      } catch (const std::invalid_argument& e) {
        node_error(*box, e.what());
      }
    }
  }
  return out;
}

std::vector<GroundTruthBox> parse_cvat_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open annotation file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_cvat(buf.str());
}

void cvat_write(const std::vector<GroundTruthBox>& boxes, std::ostream& out) {
  std::map<int, std::vector<const GroundTruthBox*>> tracks;
  for (const auto& b : boxes) tracks[b.track_id].push_back(&b);

  out << "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<annotations>\n"
         "  <version>1.1</version>\n";
  for (auto& [id, list] : tracks) {
    std::stable_sort(list.begin(), list.end(),
                     [](const GroundTruthBox* a, const GroundTruthBox* b) {
                       return a->frame_seq < b->frame_seq;
                     });
    out << "  <track id=\"" << id << "\" label=\"" << xml_escape(list.front()->class_label)
        << "\">\n";
    for (const GroundTruthBox* b : list) {
      out << "    <box frame=\"" << b->frame_seq << "\" xtl=\"" << fmt(b->bbox.x_min())
          << "\" ytl=\"" << fmt(b->bbox.y_min()) << "\" xbr=\"" << fmt(b->bbox.x_max())
          << "\" ybr=\"" << fmt(b->bbox.y_max()) << "\" occluded=\"0\" outside=\"0\"></box>\n";
    }
    out << "  </track>\n";
  }
  out << "</annotations>\n";
}

void cvat_write_file(const std::vector<GroundTruthBox>& boxes, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write annotation file: " + path);
  cvat_write(boxes, out);
}

void save_truth_motion(const std::vector<GroundTruthBox>& boxes, std::ostream& out) {
  json motions = json::array();
  for (const auto& b : boxes) {
    if (!b.true_motion) continue;
    motions.push_back({{"track_id", b.track_id},
                       {"frame_seq", b.frame_seq},
                       {"dx", b.true_motion->x},
                       {"dy", b.true_motion->y}});
  }
  out << json{{"motions", motions}}.dump(2) << '\n';
}

void save_truth_motion_file(const std::vector<GroundTruthBox>& boxes,
                            const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write motion file: " + path);
  save_truth_motion(boxes, out);
}

void load_truth_motion(std::vector<GroundTruthBox>& boxes, std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("motion file: ") + e.what());
  }
  std::map<std::pair<int, std::int64_t>, Vec2> by_key;
  for (const auto& m : doc.at("motions"))
    by_key[{m.at("track_id").get<int>(), m.at("frame_seq").get<std::int64_t>()}] =
        Vec2{m.at("dx").get<double>(), m.at("dy").get<double>()};
  for (auto& b : boxes) {
    auto it = by_key.find({b.track_id, b.frame_seq});
    if (it != by_key.end()) b.true_motion = it->second;
  }
}

void load_truth_motion_file(std::vector<GroundTruthBox>& boxes, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open motion file: " + path);
  load_truth_motion(boxes, in);
}

}  // namespace traffic
