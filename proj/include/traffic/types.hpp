#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "traffic/geometry.hpp"

namespace traffic {

struct Detection {
  std::int64_t frame_seq = 0;
  BBox bbox;
  std::string class_label;
  double objectness = 1.0;        // [0,1]
  double class_confidence = 1.0;  // [0,1]
  std::optional<std::map<std::string, double>> class_scores;

  // Combined confidence used by evaluation and NMS ordering.
  double confidence() const { return objectness * class_confidence; }

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

// Displacement of one detection between consecutive frames, in pixels/frame.
// angle_deg follows the shared y-up convention and is absent (nullopt) when
// the magnitude is below the epsilon used at construction.
struct MotionEstimate {
  double dx = 0.0;
  double dy = 0.0;
  std::optional<double> angle_deg;
  double magnitude = 0.0;
  int support = 0;
};

MotionEstimate make_motion(double dx, double dy, int support,
                           double angle_epsilon = 1e-6);

enum class BehaviorKind { WRONG_WAY, PROHIBITED_SURFACE, ILLEGAL_STOP };

std::string to_string(BehaviorKind k);
std::optional<BehaviorKind> behavior_kind_from_string(const std::string& s);

struct BehaviorEvent {
  BehaviorKind kind = BehaviorKind::WRONG_WAY;
  std::int64_t first_seq = 0;
  std::int64_t last_seq = 0;
  BBox bbox;
  std::string class_label;
  int zone_id = 0;
  std::map<std::string, double> evidence;
};

struct GroundTruthBox {
  std::int64_t frame_seq = 0;
  BBox bbox;
  std::string class_label;
  int track_id = 0;
  std::optional<Vec2> true_motion;
};

}  // namespace traffic
