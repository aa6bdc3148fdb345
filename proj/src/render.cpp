#include "traffic/render.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace traffic {

namespace {

struct Canvas {
  std::vector<std::uint8_t>& px;
  int w;
  int h;

  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    auto* p = px.data() + 3 * (static_cast<std::size_t>(y) * w + x);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
};

void draw_line(Canvas& cv, int x0, int y0, int x1, int y1, Rgb c) {
  int dx = std::abs(x1 - x0);
  int dy = -std::abs(y1 - y0);
  int sx = x0 < x1 ? 1 : -1;
  int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    cv.set(x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_text(Canvas& cv, int x, int y, const std::string& text, Rgb c) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& cols = glyph5x7(text[i]);
    int gx = x + static_cast<int>(i) * 6;
    for (int col = 0; col < 5; ++col)
      for (int row = 0; row < 7; ++row)
        if (cols[col] & (1u << row)) cv.set(gx + col, y + row, c);
  }
}

void draw_box(Canvas& cv, const BoxCmd& cmd) {
  int x0 = round_px(cmd.box.x_min());
  int y0 = round_px(cmd.box.y_min());
  int x1 = round_px(cmd.box.x_max());
  int y1 = round_px(cmd.box.y_max());
  // 2px outline drawn inward from the rounded rectangle; bands clamp so a
  // degenerate box never paints outside [x0,x1]x[y0,y1].
  int ti = std::min(y0 + 1, y1);
  int bi = std::max(y1 - 1, y0);
  int li = std::min(x0 + 1, x1);
  int ri = std::max(x1 - 1, x0);
  for (int x = x0; x <= x1; ++x) {
    for (int y = y0; y <= ti; ++y) cv.set(x, y, cmd.color);
    for (int y = bi; y <= y1; ++y) cv.set(x, y, cmd.color);
  }
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= li; ++x) cv.set(x, y, cmd.color);
    for (int x = ri; x <= x1; ++x) cv.set(x, y, cmd.color);
  }
  if (!cmd.label.empty()) draw_text(cv, x0, y0 - 8, cmd.label, cmd.color);
}

void draw_arrow(Canvas& cv, const ArrowCmd& cmd) {
  int x0 = round_px(cmd.origin.x);
  int y0 = round_px(cmd.origin.y);
  double tipx = cmd.origin.x + cmd.dx;
  double tipy = cmd.origin.y + cmd.dy;
  int x1 = round_px(tipx);
  int y1 = round_px(tipy);
  draw_line(cv, x0, y0, x1, y1, cmd.color);
  if (std::hypot(cmd.dx, cmd.dy) < 1.0) return;  // head would swamp the shaft
  double theta = std::atan2(cmd.dy, cmd.dx);
  for (int s : {-1, 1}) {
    double phi = theta + s * (5.0 * 3.14159265358979323846 / 6.0);
    int bx = round_px(tipx + 6.0 * std::cos(phi));
    int by = round_px(tipy + 6.0 * std::sin(phi));
    draw_line(cv, x1, y1, bx, by, cmd.color);
  }
}

void draw_tint(Canvas& cv, const MaskTintCmd& cmd) {
  if (!cmd.raster || cmd.width <= 0 || cmd.height <= 0) return;
  int w = std::min(cv.w, cmd.width);
  int h = std::min(cv.h, cmd.height);
  double a = std::clamp(cmd.alpha, 0.0, 1.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t id = (*cmd.raster)[static_cast<std::size_t>(y) * cmd.width + x];
      if (id == 0) continue;
      auto it = cmd.palette.find(id);
      if (it == cmd.palette.end()) continue;
      auto* p = cv.px.data() + 3 * (static_cast<std::size_t>(y) * cv.w + x);
      for (int c = 0; c < 3; ++c) {
        double v = (1.0 - a) * p[c] + a * it->second[c];
        p[c] = static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
      }
    }
  }
}

}  // namespace

Frame render_overlay(const Frame& rgb, const OverlayLayer& layer) {
  if (rgb.format() != PixelFormat::RGB24)
    throw std::invalid_argument("render_overlay: frame must be RGB24");
  std::vector<std::uint8_t> out(rgb.data().begin(), rgb.data().end());
  Canvas cv{out, rgb.width(), rgb.height()};
  for (const auto& cmd : layer.commands) {
    std::visit([&](const auto& c) {
      using T = std::decay_t<decltype(c)>;
      if constexpr (std::is_same_v<T, BoxCmd>) draw_box(cv, c);
      else if constexpr (std::is_same_v<T, ArrowCmd>) draw_arrow(cv, c);
      else draw_tint(cv, c);
    }, cmd);
  }
  return Frame(rgb.seq(), rgb.timestamp_ms(), rgb.width(), rgb.height(),
               PixelFormat::RGB24, std::move(out));
}

}  // namespace traffic
