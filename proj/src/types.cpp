#include "traffic/types.hpp"

#include <cmath>
#include <stdexcept>

namespace traffic {

void Detection::validate() const {
  if (frame_seq < 0) throw std::invalid_argument("Detection: frame_seq < 0");
  if (!(objectness >= 0.0 && objectness <= 1.0)) {
    throw std::invalid_argument("Detection: objectness outside [0,1]");
  }
  if (!(class_confidence >= 0.0 && class_confidence <= 1.0)) {
    throw std::invalid_argument("Detection: class_confidence outside [0,1]");
  }
  if (class_scores) {
    double best = -1.0;
    for (const auto& [label, score] : *class_scores) {
      if (!(score >= 0.0 && score <= 1.0)) {
        throw std::invalid_argument("Detection: class score outside [0,1] for " + label);
      }
      if (score > best) best = score;
    }
    auto it = class_scores->find(class_label);
    if (it == class_scores->end() || it->second < best) {
      throw std::invalid_argument(
          "Detection: class_label does not attain the class_scores maximum");
    }
  }
}

MotionEstimate make_motion(double dx, double dy, int support, double angle_epsilon) {
  if (support < 0) throw std::invalid_argument("MotionEstimate: support < 0");
  MotionEstimate m;
  m.dx = dx;
  m.dy = dy;
  m.support = support;
  m.magnitude = std::hypot(dx, dy);
  if (m.magnitude >= angle_epsilon) {
    m.angle_deg = direction_angle_deg(dx, dy);
  }
  return m;
}

std::string to_string(BehaviorKind k) {
  switch (k) {
    case BehaviorKind::WRONG_WAY: return "WRONG_WAY";
    case BehaviorKind::PROHIBITED_SURFACE: return "PROHIBITED_SURFACE";
    case BehaviorKind::ILLEGAL_STOP: return "ILLEGAL_STOP";
  }
  return "?";
}

std::optional<BehaviorKind> behavior_kind_from_string(const std::string& s) {
  if (s == "WRONG_WAY") return BehaviorKind::WRONG_WAY;
  if (s == "PROHIBITED_SURFACE") return BehaviorKind::PROHIBITED_SURFACE;
  if (s == "ILLEGAL_STOP") return BehaviorKind::ILLEGAL_STOP;
  return std::nullopt;
}

}  // namespace traffic
