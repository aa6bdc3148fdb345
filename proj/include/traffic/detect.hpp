#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "traffic/frame.hpp"
#include "traffic/types.hpp"

namespace traffic {

// Line-delimited JSON, one DetectionRecord per line. Parse or range errors
// carry the 1-based line number.
std::map<std::int64_t, std::vector<Detection>> load_detections(std::istream& in);
std::map<std::int64_t, std::vector<Detection>> load_detections_file(const std::string& path);

void save_detections(std::ostream& out,
                     const std::map<std::int64_t, std::vector<Detection>>& dets);
void save_detections_file(const std::string& path,
                          const std::map<std::int64_t, std::vector<Detection>>& dets);

// Per-pixel running mean/variance background subtractor. Stateful and
// strictly sequential: feed frames in stream order from a single worker.
class BackgroundModel {
 public:
  explicit BackgroundModel(double alpha = 0.02, double k = 4.0);

  // Classifies against the current model, then folds the frame in. The
  // first frame initializes the model and yields an all-background mask.
  // Returns a GRAY8 mask, 255 = foreground.
  Frame update(const Frame& gray);

  bool initialized() const { return initialized_; }
  double mean_at(int x, int y) const;
  double variance_at(int x, int y) const;

 private:
  double alpha_;
  double k_;
  int width_ = 0;
  int height_ = 0;
  bool initialized_ = false;
  std::vector<double> mu_;
  std::vector<double> var_;
};

// 8-connected components of a binary mask (nonzero = set); boxes of
// components whose pixel count reaches min_area, sorted by (y_min, x_min).
// Box edges follow the pixel-span convention: a component covering columns
// [a,b] yields x_min=a, x_max=b+1.
std::vector<BBox> connected_components(const Frame& mask, int min_area);

// bg subtraction + components, packaged as class-agnostic detections with
// objectness = min(1, pixel_area / (4*min_area)).
std::vector<Detection> blob_detect(BackgroundModel& model, const Frame& gray,
                                   int min_area);

// Greedy same-class suppression by descending objectness; boxes with IOU
// strictly above the threshold against a kept box are dropped. Ties break
// on bbox lexicographic order, so the result is input-order independent.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

}  // namespace traffic
