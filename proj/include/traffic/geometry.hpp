#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace traffic {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

// Rounding convention used everywhere a real coordinate becomes a pixel
// index: nearest integer, ties away from zero.
inline int round_px(double v) { return static_cast<int>(std::lround(v)); }

// Axis-aligned box in real-valued pixel coordinates, origin top-left,
// y growing downward. Construction rejects degenerate boxes.
class BBox {
 public:
  BBox(double x_min, double y_min, double x_max, double y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw std::invalid_argument("BBox: requires x_min < x_max and y_min < y_max");
    }
  }

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }

  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }

  BBox translated(double tx, double ty) const {
    return BBox(x_min_ + tx, y_min_ + ty, x_max_ + tx, y_max_ + ty);
  }

  bool contains(double x, double y) const {
    return x >= x_min_ && x <= x_max_ && y >= y_min_ && y <= y_max_;
  }

  friend bool operator==(const BBox& a, const BBox& b) {
    return a.x_min_ == b.x_min_ && a.y_min_ == b.y_min_ &&
           a.x_max_ == b.x_max_ && a.y_max_ == b.y_max_;
  }

  // Lexicographic order on (x_min, y_min, x_max, y_max); the deterministic
  // tie-break used by matching and suppression.
  friend bool operator<(const BBox& a, const BBox& b) {
    if (a.x_min_ != b.x_min_) return a.x_min_ < b.x_min_;
    if (a.y_min_ != b.y_min_) return a.y_min_ < b.y_min_;
    if (a.x_max_ != b.x_max_) return a.x_max_ < b.x_max_;
    return a.y_max_ < b.y_max_;
  }

 private:
  double x_min_, y_min_, x_max_, y_max_;
};

// Intersection-over-union of two boxes. Exactly 0.0 when disjoint.
double iou(const BBox& a, const BBox& b);

// Clamps a box to [0,w]x[0,h]; nullopt when nothing remains.
std::optional<BBox> clip_to_frame(const BBox& b, int width, int height);

// Bottom-center of the box, the approximate ground-contact point used for
// zone lookup.
Vec2 anchor_point(const BBox& b);

// Angle convention: image y points down, but angles are reported on a y-up
// frame (dy is negated before atan2), so rightward = 0 deg, up-screen =
// 90 deg, result in [0, 360).
double direction_angle_deg(double dx, double dy);

// Unsigned angle between two vectors in degrees, in [0, 180]. Both vectors
// must be expressed in the same coordinate convention.
double angle_between_deg(double ax, double ay, double bx, double by);

}  // namespace traffic
