#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "traffic/eval.hpp"

namespace traffic {

// All writers are byte-deterministic given their inputs.

void pr_csv(const std::vector<PRPoint>& curve, std::ostream& out);

// One file with a normalized section and a raw-count section.
void confusion_csv(const ConfusionMatrix& m, std::ostream& out);

// Standalone SVG with one <circle> marker per PR point.
std::string pr_svg(const std::vector<PRPoint>& curve, const std::string& title);

struct EvalReport {
  std::map<std::string, std::vector<PRPoint>> curves;  // class -> curve
  std::map<std::pair<double, double>, ConfusionMatrix> matrices;
  AngleErrorStats angle;
};

// Writes pr_<class>.csv/.svg, confusion_o<t>_l<t>.csv, summary.txt into dir
// (created if needed); returns the paths written, sorted.
std::vector<std::string> write_eval_report(const std::string& dir, const EvalReport& report);

}  // namespace traffic
