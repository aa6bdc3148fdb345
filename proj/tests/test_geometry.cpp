#include <cmath>

#include "doctest.h"
#include "traffic/geometry.hpp"
#include "traffic/synth.hpp"

using namespace traffic;

namespace {

// Straight from the definition: intersection area over union area.
double iou_oracle(const BBox& a, const BBox& b) {
  double ix = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  double iy = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

BBox random_box(Rng& rng) {
  double x0 = rng.uniform(-20.0, 80.0);
  double y0 = rng.uniform(-20.0, 80.0);
  return BBox(x0, y0, x0 + rng.uniform(0.5, 40.0), y0 + rng.uniform(0.5, 40.0));
}

}  // namespace

TEST_CASE("bbox construction rejects degenerate boxes") {
  CHECK_THROWS_AS(BBox(5, 0, 5, 10), std::invalid_argument);
  CHECK_THROWS_AS(BBox(0, 10, 10, 10), std::invalid_argument);
  CHECK_THROWS_AS(BBox(10, 0, 5, 10), std::invalid_argument);
  CHECK_NOTHROW(BBox(0, 0, 0.001, 0.001));
}

TEST_CASE("iou identity, disjoint and partial overlap") {
  BBox a(0, 0, 10, 10);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BBox(20, 20, 30, 30)) == 0.0);  // exactly zero when disjoint
  CHECK(std::abs(iou(a, BBox(5, 0, 15, 10)) - 1.0 / 3.0) < 1e-15);  // 50/150
  CHECK(iou(a, BBox(10, 0, 20, 10)) == 0.0);  // shared edge has zero area
}

TEST_CASE("iou properties: symmetry, bounds, translation invariance, oracle") {
  Rng rng(0x5eedULL);
  for (int i = 0; i < 500; ++i) {
    BBox a = random_box(rng);
    BBox b = random_box(rng);
    double ab = iou(a, b);
    CHECK(ab == iou(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
    CHECK(std::abs(ab - iou_oracle(a, b)) < 1e-12);
    double tx = rng.uniform(-50.0, 50.0);
    double ty = rng.uniform(-50.0, 50.0);
    CHECK(std::abs(iou(a.translated(tx, ty), b.translated(tx, ty)) - ab) < 1e-9);
    CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("iou is 1 only for identical coordinates") {
  BBox a(0, 0, 10, 10);
  CHECK(iou(a, BBox(0, 0, 10, 10.0001)) < 1.0);
  CHECK(iou(a, BBox(0.0001, 0, 10, 10)) < 1.0);
}

TEST_CASE("clip_to_frame clamps, passes interior boxes, drops outside boxes") {
  auto c = clip_to_frame(BBox(-5, -5, 10, 10), 100, 100);
  REQUIRE(c.has_value());
  CHECK(*c == BBox(0, 0, 10, 10));

  auto interior = clip_to_frame(BBox(5, 5, 8, 8), 100, 100);
  REQUIRE(interior.has_value());
  CHECK(*interior == BBox(5, 5, 8, 8));

  CHECK_FALSE(clip_to_frame(BBox(120, 120, 130, 130), 100, 100).has_value());
  CHECK_FALSE(clip_to_frame(BBox(-10, -10, 0, 0), 100, 100).has_value());
}

TEST_CASE("anchor_point is bottom-center") {
  Vec2 a = anchor_point(BBox(0, 0, 10, 20));
  CHECK(a.x == 5.0);
  CHECK(a.y == 20.0);
  Vec2 b = anchor_point(BBox(4, 4, 6, 6));
  CHECK(b.x == 5.0);
  CHECK(b.y == 6.0);
  Vec2 c = anchor_point(BBox(0, 0, 1, 1));
  CHECK(c.x == 0.5);
  CHECK(c.y == 1.0);
}

TEST_CASE("round_px rounds half away from zero") {
  CHECK(round_px(0.5) == 1);
  CHECK(round_px(-0.5) == -1);
  CHECK(round_px(2.5) == 3);
  CHECK(round_px(-2.5) == -3);
  CHECK(round_px(2.4) == 2);
  CHECK(round_px(-2.4) == -2);
}

TEST_CASE("direction_angle_deg reports y-up angles from y-down displacements") {
  CHECK(direction_angle_deg(1, 0) == doctest::Approx(0.0));
  CHECK(direction_angle_deg(0, -1) == doctest::Approx(90.0));   // up-screen
  CHECK(direction_angle_deg(-1, 0) == doctest::Approx(180.0));
  CHECK(direction_angle_deg(0, 1) == doctest::Approx(270.0));   // down-screen
  CHECK(direction_angle_deg(1, -1) == doctest::Approx(45.0));
  // result stays in [0, 360)
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    double a = direction_angle_deg(rng.uniform(-5, 5), rng.uniform(-5, 5));
    CHECK(a >= 0.0);
    CHECK(a < 360.0);
  }
}

TEST_CASE("angle_between_deg is unsigned, scale-free, in [0,180]") {
  CHECK(angle_between_deg(1, 0, 0, 1) == doctest::Approx(90.0));
  CHECK(angle_between_deg(1, 0, -1, 0) == doctest::Approx(180.0));
  CHECK(angle_between_deg(1, 0, 100, 0) == doctest::Approx(0.0));
  CHECK(angle_between_deg(2, 0, 0, -3) == doctest::Approx(90.0));
  CHECK(angle_between_deg(1, 1, -1, -1) == doctest::Approx(180.0));
  CHECK(angle_between_deg(0.001, 0, 0, 0.001) == doctest::Approx(90.0));
}

TEST_CASE("bbox lexicographic order breaks ties deterministically") {
  CHECK(BBox(0, 0, 10, 10) < BBox(1, 0, 10, 10));
  CHECK(BBox(0, 0, 10, 10) < BBox(0, 1, 10, 10));
  CHECK(BBox(0, 0, 9, 10) < BBox(0, 0, 10, 10));
  CHECK(BBox(0, 0, 10, 9) < BBox(0, 0, 10, 10));
  CHECK_FALSE(BBox(0, 0, 10, 10) < BBox(0, 0, 10, 10));
}
