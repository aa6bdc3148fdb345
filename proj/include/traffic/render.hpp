#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "traffic/frame.hpp"
#include "traffic/geometry.hpp"

namespace traffic {

using Rgb = std::array<std::uint8_t, 3>;

struct BoxCmd {
  BBox box;
  Rgb color;
  std::string label;  // empty = no label
};

struct ArrowCmd {
  Vec2 origin;
  double dx = 0.0;
  double dy = 0.0;
  Rgb color;
};

// Tints every pixel whose raster id is nonzero with palette[id] at the given
// alpha. Raster dims must match the frame being rendered.
struct MaskTintCmd {
  std::shared_ptr<const std::vector<std::uint8_t>> raster;
  int width = 0;
  int height = 0;
  std::map<std::uint8_t, Rgb> palette;
  double alpha = 0.35;
};

using DrawCmd = std::variant<BoxCmd, ArrowCmd, MaskTintCmd>;

struct OverlayLayer {
  std::vector<DrawCmd> commands;
};

// 5x7 bitmap glyph columns for printable ASCII; unknown characters render
// as a hollow box. Used by label drawing so golden images are portable.
const std::array<std::uint8_t, 5>& glyph5x7(char c);

// Deterministic integer rasterization onto a copy of the frame: 2px box
// outlines, Bresenham arrow shafts with fixed 6px heads, 5x7 labels.
// Geometry outside the frame is clipped.
Frame render_overlay(const Frame& rgb, const OverlayLayer& layer);

}  // namespace traffic
