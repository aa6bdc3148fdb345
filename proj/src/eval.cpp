#include "traffic/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace traffic {

namespace {

void check_grid(const std::vector<double>& g, const char* name) {
  if (g.empty()) throw std::invalid_argument(std::string("EvalConfig: ") + name + " is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i] < 0.0 || g[i] > 1.0)
      throw std::invalid_argument(std::string("EvalConfig: ") + name + " values must be in [0,1]");
    if (i > 0 && g[i] <= g[i - 1])
      throw std::invalid_argument(std::string("EvalConfig: ") + name +
                                  " must be strictly ascending");
  }
}

}  // namespace

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0))
    throw std::invalid_argument("EvalConfig: iou_threshold must be in (0,1]");
  check_grid(objectness_grid, "objectness_grid");
  check_grid(label_grid, "label_grid");
  check_grid(confidence_grid, "confidence_grid");
}

std::string EvalConfig::mapped(const std::string& truth_label) const {
  auto it = class_mapping.find(truth_label);
  return it == class_mapping.end() ? truth_label : it->second;
}

MatchSet match_frame(const std::vector<Detection>& dets,
                     const std::vector<GroundTruthBox>& truths,
                     double iou_threshold,
                     const std::function<double(const Detection&)>& confidence_fn) {
  auto conf = confidence_fn ? confidence_fn
                            : [](const Detection& d) { return d.confidence(); };

  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    double ca = conf(dets[a]), cb = conf(dets[b]);
    if (ca != cb) return ca > cb;
    return dets[a].bbox < dets[b].bbox;
  });

  MatchSet out;
  std::vector<bool> truth_taken(truths.size(), false);
  for (std::size_t di : order) {
    std::optional<std::size_t> best;
    double best_iou = 0.0;
    for (std::size_t ti = 0; ti < truths.size(); ++ti) {
      if (truth_taken[ti]) continue;
      double v = iou(dets[di].bbox, truths[ti].bbox);
      if (v < iou_threshold) continue;
      if (!best || v > best_iou ||
          (v == best_iou && truths[ti].bbox < truths[*best].bbox)) {
        best = ti;
        best_iou = v;
      }
    }
    if (best) {
      truth_taken[*best] = true;
      out.pairs.push_back({di, *best, best_iou});
    } else {
      out.unmatched_dets.push_back(di);
    }
  }
  for (std::size_t ti = 0; ti < truths.size(); ++ti)
    if (!truth_taken[ti]) out.unmatched_truths.push_back(ti);
  return out;
}

std::map<std::int64_t, std::vector<GroundTruthBox>> group_truths(
    const std::vector<GroundTruthBox>& boxes) {
  std::map<std::int64_t, std::vector<GroundTruthBox>> out;
  for (const auto& b : boxes) out[b.frame_seq].push_back(b);
  return out;
}

namespace {

std::set<std::int64_t> all_frames(const EvalData& data) {
  std::set<std::int64_t> frames;
  for (const auto& [k, v] : data.detections) frames.insert(k);
  for (const auto& [k, v] : data.truths) frames.insert(k);
  return frames;
}

const std::vector<Detection>& dets_of(const EvalData& d, std::int64_t f) {
  static const std::vector<Detection> empty;
  auto it = d.detections.find(f);
  return it == d.detections.end() ? empty : it->second;
}

const std::vector<GroundTruthBox>& truths_of(const EvalData& d, std::int64_t f) {
  static const std::vector<GroundTruthBox> empty;
  auto it = d.truths.find(f);
  return it == d.truths.end() ? empty : it->second;
}

}  // namespace

std::vector<PRPoint> pr_curve(const EvalData& data, const std::string& class_label,
                              const EvalConfig& cfg) {
  cfg.validate();
  auto frames = all_frames(data);

  std::vector<PRPoint> out;
  for (double t : cfg.confidence_grid) {
    int tp = 0, fp = 0, fn = 0;
    for (std::int64_t f : frames) {
      std::vector<Detection> dets;
      for (const auto& d : dets_of(data, f))
        if (d.confidence() >= t) dets.push_back(d);
      std::vector<GroundTruthBox> truths;
      for (const auto& g : truths_of(data, f))
        if (cfg.mapped(g.class_label) == class_label) truths.push_back(g);

      MatchSet m = match_frame(dets, truths, cfg.iou_threshold);
      int frame_tp = 0;
      for (const auto& pr : m.pairs)
        if (dets[pr.det_index].class_label == cfg.mapped(truths[pr.truth_index].class_label))
          ++frame_tp;
      tp += frame_tp;
      fp += static_cast<int>(dets.size()) - frame_tp;
      fn += static_cast<int>(truths.size()) - frame_tp;
    }
    PRPoint p;
    p.threshold = t;
    p.tp = tp;
    p.fp = fp;
    p.fn = fn;
    p.precision = (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    p.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fn);
    out.push_back(p);
  }
  return out;
}

int ConfusionMatrix::raw_at(const std::string& row, const std::string& col) const {
  auto r = std::find(row_labels.begin(), row_labels.end(), row);
  auto c = std::find(col_labels.begin(), col_labels.end(), col);
  if (r == row_labels.end() || c == col_labels.end())
    throw std::out_of_range("ConfusionMatrix: unknown label");
  return raw[r - row_labels.begin()][c - col_labels.begin()];
}

double ConfusionMatrix::norm_at(const std::string& row, const std::string& col) const {
  auto r = std::find(row_labels.begin(), row_labels.end(), row);
  auto c = std::find(col_labels.begin(), col_labels.end(), col);
  if (r == row_labels.end() || c == col_labels.end())
    throw std::out_of_range("ConfusionMatrix: unknown label");
  return normalized[r - row_labels.begin()][c - col_labels.begin()];
}

std::map<std::pair<double, double>, ConfusionMatrix> confusion_grid(
    const EvalData& data, const EvalConfig& cfg) {
  cfg.validate();
  auto frames = all_frames(data);

  std::set<std::string> det_classes, true_classes;
  for (const auto& [f, list] : data.detections)
    for (const auto& d : list) det_classes.insert(d.class_label);
  for (const auto& [f, list] : data.truths)
    for (const auto& g : list) true_classes.insert(cfg.mapped(g.class_label));

  std::vector<std::string> rows(det_classes.begin(), det_classes.end());
  rows.push_back("not detected");
  std::vector<std::string> cols(true_classes.begin(), true_classes.end());

  std::map<std::pair<double, double>, ConfusionMatrix> out;
  for (double to : cfg.objectness_grid) {
    for (double tl : cfg.label_grid) {
      ConfusionMatrix m;
      m.row_labels = rows;
      m.col_labels = cols;
      m.raw.assign(rows.size(), std::vector<int>(cols.size(), 0));
      m.normalized.assign(rows.size(), std::vector<double>(cols.size(), 0.0));

      auto row_of = [&](const std::string& s) {
        return std::find(rows.begin(), rows.end(), s) - rows.begin();
      };
      auto col_of = [&](const std::string& s) {
        return std::find(cols.begin(), cols.end(), s) - cols.begin();
      };

      for (std::int64_t f : frames) {
        std::vector<Detection> dets;
        for (const auto& d : dets_of(data, f))
          if (d.objectness >= to && d.class_confidence >= tl) dets.push_back(d);
        const auto& truths = truths_of(data, f);

        MatchSet ms = match_frame(dets, truths, cfg.iou_threshold);
        for (const auto& pr : ms.pairs)
          ++m.raw[row_of(dets[pr.det_index].class_label)]
                 [col_of(cfg.mapped(truths[pr.truth_index].class_label))];
        for (std::size_t ti : ms.unmatched_truths)
          ++m.raw[rows.size() - 1][col_of(cfg.mapped(truths[ti].class_label))];
      }

      for (std::size_t c = 0; c < cols.size(); ++c) {
        long sum = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) sum += m.raw[r][c];
        if (sum == 0) continue;
        for (std::size_t r = 0; r < rows.size(); ++r)
          m.normalized[r][c] = static_cast<double>(m.raw[r][c]) / sum;
      }
      out[{to, tl}] = std::move(m);
    }
  }
  return out;
}

double motion_angle_error(const MotionEstimate& pred, const Vec2& true_motion) {
  return angle_between_deg(pred.dx, pred.dy, true_motion.x, true_motion.y);
}

AngleErrorStats motion_error_stats(
    const EvalData& data,
    const std::map<std::int64_t, std::vector<std::optional<MotionEstimate>>>& motions,
    const EvalConfig& cfg, double min_magnitude) {
  AngleErrorStats stats;
  double sum = 0.0;
  for (std::int64_t f : all_frames(data)) {
    const auto& dets = dets_of(data, f);
    const auto& truths = truths_of(data, f);
    auto mit = motions.find(f);
    MatchSet ms = match_frame(dets, truths, cfg.iou_threshold);
    for (const auto& pr : ms.pairs) {
      const auto& truth = truths[pr.truth_index];
      const std::optional<MotionEstimate>* pred = nullptr;
      if (mit != motions.end() && pr.det_index < mit->second.size())
        pred = &mit->second[pr.det_index];
      bool pred_ok = pred && pred->has_value() && (*pred)->magnitude >= min_magnitude;
      bool truth_ok = truth.true_motion &&
                      std::hypot(truth.true_motion->x, truth.true_motion->y) >= min_magnitude;
      if (pred_ok && truth_ok) {
        sum += motion_angle_error(**pred, *truth.true_motion);
        ++stats.evaluated;
      } else {
        ++stats.skipped;
      }
    }
  }
  if (stats.evaluated > 0) stats.mean_deg = sum / stats.evaluated;
  return stats;
}

}  // namespace traffic
