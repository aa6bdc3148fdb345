#include "traffic/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace traffic {

namespace {

using nlohmann::json;

constexpr double kVarianceFloor = 1.0;

[[noreturn]] void line_error(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("detections line " + std::to_string(line_no) + ": " + what);
}

Detection parse_record(const json& j, std::size_t line_no) {
  for (const char* key :
       {"frame_seq", "class_label", "x_min", "y_min", "x_max", "y_max",
        "objectness", "class_confidence"}) {
    if (!j.contains(key)) line_error(line_no, std::string("missing field '") + key + "'");
  }
  try {
    Detection d{j.at("frame_seq").get<std::int64_t>(),
                BBox(j.at("x_min").get<double>(), j.at("y_min").get<double>(),
                     j.at("x_max").get<double>(), j.at("y_max").get<double>()),
                j.at("class_label").get<std::string>(),
                j.at("objectness").get<double>(),
                j.at("class_confidence").get<double>(),
                std::nullopt};
    if (j.contains("class_scores")) {
      std::map<std::string, double> scores;
      for (auto it = j.at("class_scores").begin(); it != j.at("class_scores").end(); ++it)
        scores[it.key()] = it.value().get<double>();
      d.class_scores = std::move(scores);
    }
    d.validate();
    return d;
  } catch (const json::exception& e) {
    line_error(line_no, e.what());
  } catch (const std::invalid_argument& e) {
    line_error(line_no, e.what());
  }
}

}  // namespace

std::map<std::int64_t, std::vector<Detection>> load_detections(std::istream& in) {
  std::map<std::int64_t, std::vector<Detection>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      line_error(line_no, e.what());
    }
    if (!j.is_object()) line_error(line_no, "expected a JSON object");
    Detection d = parse_record(j, line_no);
    out[d.frame_seq].push_back(std::move(d));
  }
  return out;
}

std::map<std::int64_t, std::vector<Detection>> load_detections_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open detections file: " + path);
  return load_detections(in);
}

void save_detections(std::ostream& out,
                     const std::map<std::int64_t, std::vector<Detection>>& dets) {
  for (const auto& [seq, list] : dets) {
    for (const auto& d : list) {
      json j{{"frame_seq", d.frame_seq},
             {"class_label", d.class_label},
             {"x_min", d.bbox.x_min()},
             {"y_min", d.bbox.y_min()},
             {"x_max", d.bbox.x_max()},
             {"y_max", d.bbox.y_max()},
             {"objectness", d.objectness},
             {"class_confidence", d.class_confidence}};
      if (d.class_scores) j["class_scores"] = *d.class_scores;
      out << j.dump() << '\n';
    }
  }
}

void save_detections_file(const std::string& path,
                          const std::map<std::int64_t, std::vector<Detection>>& dets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open detections file for write: " + path);
  save_detections(out, dets);
}

BackgroundModel::BackgroundModel(double alpha, double k) : alpha_(alpha), k_(k) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("BackgroundModel: alpha must be in (0,1)");
  if (k <= 0.0) throw std::invalid_argument("BackgroundModel: k must be > 0");
}

double BackgroundModel::mean_at(int x, int y) const {
  return mu_.at(static_cast<std::size_t>(y) * width_ + x);
}

double BackgroundModel::variance_at(int x, int y) const {
  return var_.at(static_cast<std::size_t>(y) * width_ + x);
}

Frame BackgroundModel::update(const Frame& gray) {
  if (gray.format() != PixelFormat::GRAY8)
    throw std::invalid_argument("BackgroundModel: frame must be GRAY8");
  std::size_t n = static_cast<std::size_t>(gray.width()) * gray.height();
  std::vector<std::uint8_t> mask(n, 0);

  if (!initialized_) {
    width_ = gray.width();
    height_ = gray.height();
    mu_.assign(gray.data().begin(), gray.data().end());
    var_.assign(n, kVarianceFloor);
    initialized_ = true;
    return Frame(gray.seq(), gray.timestamp_ms(), width_, height_,
                 PixelFormat::GRAY8, std::move(mask));
  }
  if (gray.width() != width_ || gray.height() != height_)
    throw std::invalid_argument("BackgroundModel: frame dims differ from model");

  auto px = gray.data();
  for (std::size_t i = 0; i < n; ++i) {
    double v = px[i];
    if (std::abs(v - mu_[i]) > k_ * std::sqrt(var_[i])) mask[i] = 255;
    mu_[i] = (1.0 - alpha_) * mu_[i] + alpha_ * v;
    double dev = v - mu_[i];
    var_[i] = std::max((1.0 - alpha_) * var_[i] + alpha_ * dev * dev, kVarianceFloor);
  }
  return Frame(gray.seq(), gray.timestamp_ms(), width_, height_,
               PixelFormat::GRAY8, std::move(mask));
}

namespace {

struct Component {
  int min_x, min_y, max_x, max_y;
  int area;
};

std::vector<Component> label_components(const Frame& mask, int min_area) {
  int w = mask.width(), h = mask.height();
  auto px = mask.data();
  std::vector<bool> seen(static_cast<std::size_t>(w) * h, false);
  std::vector<Component> comps;
  std::vector<std::pair<int, int>> stack;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!px[idx] || seen[idx]) continue;
      Component c{x, y, x, y, 0};
      stack.push_back({x, y});
      seen[idx] = true;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.area;
        c.min_x = std::min(c.min_x, cx);
        c.min_y = std::min(c.min_y, cy);
        c.max_x = std::max(c.max_x, cx);
        c.max_y = std::max(c.max_y, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (px[nidx] && !seen[nidx]) {
              seen[nidx] = true;
              stack.push_back({nx, ny});
            }
          }
      }
      if (c.area >= min_area) comps.push_back(c);
    }
  }
  std::sort(comps.begin(), comps.end(), [](const Component& a, const Component& b) {
    if (a.min_y != b.min_y) return a.min_y < b.min_y;
    return a.min_x < b.min_x;
  });
  return comps;
}

}  // namespace

std::vector<BBox> connected_components(const Frame& mask, int min_area) {
  if (mask.format() != PixelFormat::GRAY8)
    throw std::invalid_argument("connected_components: mask must be GRAY8");
  std::vector<BBox> boxes;
  for (const auto& c : label_components(mask, min_area))
    boxes.emplace_back(c.min_x, c.min_y, c.max_x + 1, c.max_y + 1);
  return boxes;
}

std::vector<Detection> blob_detect(BackgroundModel& model, const Frame& gray,
                                   int min_area) {
  if (min_area < 1) throw std::invalid_argument("blob_detect: min_area must be >= 1");
  Frame mask = model.update(gray);
  std::vector<Detection> dets;
  for (const auto& c : label_components(mask, min_area)) {
    dets.push_back(Detection{
        gray.seq(),
        BBox(c.min_x, c.min_y, c.max_x + 1, c.max_y + 1),
        "object",
        std::min(1.0, c.area / (4.0 * min_area)),
        1.0,
        std::nullopt});
  }
  return dets;
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.objectness != b.objectness) return a.objectness > b.objectness;
    return a.bbox < b.bbox;
  });
  std::vector<Detection> kept;
  for (auto& d : dets) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (k.class_label == d.class_label && iou(k.bbox, d.bbox) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(d));
  }
  return kept;
}

}  // namespace traffic
