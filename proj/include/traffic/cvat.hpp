#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "traffic/types.hpp"

namespace traffic {

// CVAT 1.1 export subset: <annotations><track id label><box frame xtl ytl
// xbr ybr outside>. Boxes with outside="1" are skipped. Errors name the
// offending attribute and source line.
std::vector<GroundTruthBox> parse_cvat(const std::string& xml_text);
std::vector<GroundTruthBox> parse_cvat_file(const std::string& path);

// Canonical serialization: tracks ordered by id, boxes by frame, floats in
// shortest round-trip form. parse_cvat(cvat_write(x)) == x, and re-writing
// a written file is byte-identical.
void cvat_write(const std::vector<GroundTruthBox>& boxes, std::ostream& out);
void cvat_write_file(const std::vector<GroundTruthBox>& boxes, const std::string& path);

// Companion motion file: {"motions": [{"track_id", "frame_seq", "dx",
// "dy"}...]}. apply fills GroundTruthBox::true_motion in place.
void save_truth_motion(const std::vector<GroundTruthBox>& boxes, std::ostream& out);
void save_truth_motion_file(const std::vector<GroundTruthBox>& boxes,
                            const std::string& path);
void load_truth_motion(std::vector<GroundTruthBox>& boxes, std::istream& in);
void load_truth_motion_file(std::vector<GroundTruthBox>& boxes, const std::string& path);

}  // namespace traffic
