#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "traffic/types.hpp"

namespace traffic {

struct EvalConfig {
  double iou_threshold = 0.25;
  std::vector<double> objectness_grid{0.4};
  std::vector<double> label_grid{0.1};
  std::vector<double> confidence_grid{0.0, 0.1, 0.2, 0.3, 0.4, 0.5,
                                      0.6, 0.7, 0.8, 0.9, 1.0};
  // ground-truth label -> detector label, applied before class comparison
  std::map<std::string, std::string> class_mapping;

  void validate() const;
  std::string mapped(const std::string& truth_label) const;
};

struct MatchPair {
  std::size_t det_index;
  std::size_t truth_index;
  double iou;
};

struct MatchSet {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_dets;
  std::vector<std::size_t> unmatched_truths;
};

// Greedy one-to-one matching: detections in descending confidence (ties by
// bbox lexicographic) each take the still-available truth with the highest
// IOU when that IOU >= threshold. Class-agnostic; classes are compared by
// the metrics afterwards. Equal-IOU ties pick the lexicographically
// smallest truth bbox.
MatchSet match_frame(const std::vector<Detection>& dets,
                     const std::vector<GroundTruthBox>& truths,
                     double iou_threshold,
                     const std::function<double(const Detection&)>& confidence_fn = {});

struct PRPoint {
  double threshold = 0.0;
  double precision = 1.0;  // tp/(tp+fp), vacuously 1 when nothing passes
  double recall = 1.0;     // tp/(tp+fn), vacuously 1 when no truths
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

struct EvalData {
  std::map<std::int64_t, std::vector<Detection>> detections;
  std::map<std::int64_t, std::vector<GroundTruthBox>> truths;
};

std::map<std::int64_t, std::vector<GroundTruthBox>> group_truths(
    const std::vector<GroundTruthBox>& boxes);

// One PRPoint per confidence_grid threshold for the given class: truths of
// that class, all detections at or above the threshold; tp counts matched
// class-equal pairs, fp the remaining passing detections, fn the remaining
// truths.
std::vector<PRPoint> pr_curve(const EvalData& data, const std::string& class_label,
                              const EvalConfig& cfg);

struct ConfusionMatrix {
  std::vector<std::string> row_labels;  // detector classes + "not detected"
  std::vector<std::string> col_labels;  // true classes
  std::vector<std::vector<int>> raw;          // [row][col]
  std::vector<std::vector<double>> normalized;  // columns sum to 1 when nonzero

  int raw_at(const std::string& row, const std::string& col) const;
  double norm_at(const std::string& row, const std::string& col) const;
};

// Grid search over objectness x label thresholds, one matrix per cell.
std::map<std::pair<double, double>, ConfusionMatrix> confusion_grid(
    const EvalData& data, const EvalConfig& cfg);

// Unsigned angle in [0,180] between a predicted motion and the true
// displacement; scale-free.
double motion_angle_error(const MotionEstimate& pred, const Vec2& true_motion);

struct AngleErrorStats {
  double mean_deg = 0.0;
  int evaluated = 0;  // matched pairs with both magnitudes >= epsilon
  int skipped = 0;    // matched pairs excluded (absent or below epsilon)
};

// Mean over matched (detection, truth) pairs. motions[frame][i] aligns with
// data.detections[frame][i]; pairs lacking either side are skipped.
AngleErrorStats motion_error_stats(
    const EvalData& data,
    const std::map<std::int64_t, std::vector<std::optional<MotionEstimate>>>& motions,
    const EvalConfig& cfg, double min_magnitude = 0.5);

}  // namespace traffic
