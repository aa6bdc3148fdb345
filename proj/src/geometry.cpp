#include "traffic/geometry.hpp"

#include <algorithm>

namespace traffic {

double iou(const BBox& a, const BBox& b) {
  const double ix_min = std::max(a.x_min(), b.x_min());
  const double iy_min = std::max(a.y_min(), b.y_min());
  const double ix_max = std::min(a.x_max(), b.x_max());
  const double iy_max = std::min(a.y_max(), b.y_max());
  const double iw = ix_max - ix_min;
  const double ih = iy_max - iy_min;
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

std::optional<BBox> clip_to_frame(const BBox& b, int width, int height) {
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("clip_to_frame: frame dims must be positive");
  }
  const double x0 = std::clamp(b.x_min(), 0.0, static_cast<double>(width));
  const double y0 = std::clamp(b.y_min(), 0.0, static_cast<double>(height));
  const double x1 = std::clamp(b.x_max(), 0.0, static_cast<double>(width));
  const double y1 = std::clamp(b.y_max(), 0.0, static_cast<double>(height));
  if (x0 >= x1 || y0 >= y1) return std::nullopt;
  return BBox(x0, y0, x1, y1);
}

Vec2 anchor_point(const BBox& b) {
  return Vec2{(b.x_min() + b.x_max()) / 2.0, b.y_max()};
}

double direction_angle_deg(double dx, double dy) {
  double deg = std::atan2(-dy, dx) * 180.0 / M_PI;
  if (deg < 0.0) deg += 360.0;
  if (deg >= 360.0) deg = 0.0;
  return deg;
}

double angle_between_deg(double ax, double ay, double bx, double by) {
  const double cross = ax * by - ay * bx;
  const double dot = ax * bx + ay * by;
  return std::abs(std::atan2(cross, dot)) * 180.0 / M_PI;
}

}  // namespace traffic
