#pragma once

#include <optional>
#include <vector>

#include "traffic/frame.hpp"
#include "traffic/types.hpp"

namespace traffic {

struct FeaturePoint {
  double x = 0.0;
  double y = 0.0;
  double response = 0.0;  // min eigenvalue of the structure tensor
};

struct FlowParams {
  int max_corners = 400;
  double quality_level = 0.01;  // fraction of the strongest response
  double min_distance = 7.0;
  int window = 15;  // odd, >= 3
  int pyramid_levels = 3;
  int max_iterations = 30;
  double epsilon = 0.01;  // convergence threshold on the update step, px

  void validate() const;
};

struct TrackedPoint {
  enum class Status { OK, LOST };
  Vec2 prev;
  Vec2 next;  // meaningless when LOST
  Status status = Status::LOST;
  double residual = 0.0;  // mean |temporal difference| over the window
};

// Min-eigenvalue corner detector. Gradients come from a 3x3 Sobel with
// replicate-edge padding; the structure tensor sums a 3x3 neighborhood.
// Candidates within window/2 of the border are excluded so a tracking
// window always fits.
std::vector<FeaturePoint> shi_tomasi(const Frame& gray, const FlowParams& p);

// Level 0 is the input; each coarser level applies the 5-tap binomial
// filter [1,4,6,4,1]/16 separably, then keeps even-indexed rows/columns.
std::vector<Frame> build_pyramid(const Frame& gray, int levels);

// Pyramidal iterative Lucas-Kanade. Points are level-0 coordinates in prev.
std::vector<TrackedPoint> lk_track(const std::vector<Frame>& prev_pyr,
                                   const std::vector<Frame>& next_pyr,
                                   const std::vector<FeaturePoint>& points,
                                   const FlowParams& p);

// Componentwise median displacement of OK points whose prev position lies
// inside the box. nullopt when fewer than min_support points qualify.
std::optional<MotionEstimate> box_motion(const std::vector<TrackedPoint>& tracked,
                                         const BBox& box, int min_support);

}  // namespace traffic
