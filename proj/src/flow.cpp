#include "traffic/flow.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace traffic {

namespace {

void require_gray(const Frame& f, const char* who) {
  if (f.format() != PixelFormat::GRAY8)
    throw std::invalid_argument(std::string(who) + ": frame must be GRAY8");
}

// Bilinear sample with replicate-edge taps.
double sample(const Frame& img, double x, double y) {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double fx = x - x0;
  double fy = y - y0;
  double v00 = img.gray_at(x0, y0);
  double v10 = img.gray_at(x0 + 1, y0);
  double v01 = img.gray_at(x0, y0 + 1);
  double v11 = img.gray_at(x0 + 1, y0 + 1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

double min_eig(double xx, double xy, double yy) {
  return 0.5 * ((xx + yy) - std::sqrt((xx - yy) * (xx - yy) + 4.0 * xy * xy));
}

}  // namespace

void FlowParams::validate() const {
  if (max_corners < 1) throw std::invalid_argument("FlowParams: max_corners must be >= 1");
  if (!(quality_level > 0.0 && quality_level <= 1.0))
    throw std::invalid_argument("FlowParams: quality_level must be in (0,1]");
  if (min_distance < 0.0) throw std::invalid_argument("FlowParams: min_distance must be >= 0");
  if (window < 3 || window % 2 == 0)
    throw std::invalid_argument("FlowParams: window must be odd and >= 3");
  if (pyramid_levels < 1) throw std::invalid_argument("FlowParams: pyramid_levels must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("FlowParams: max_iterations must be >= 1");
  if (epsilon <= 0.0) throw std::invalid_argument("FlowParams: epsilon must be > 0");
}

std::vector<FeaturePoint> shi_tomasi(const Frame& gray, const FlowParams& p) {
  require_gray(gray, "shi_tomasi");
  p.validate();
  int w = gray.width();
  int h = gray.height();
  if (w < p.window || h < p.window)
    throw std::invalid_argument("shi_tomasi: frame smaller than tracking window");

  std::vector<double> ix(static_cast<std::size_t>(w) * h);
  std::vector<double> iy(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto g = [&](int dx, int dy) {
        return static_cast<double>(gray.gray_at(x + dx, y + dy));
      };
      ix[static_cast<std::size_t>(y) * w + x] =
          (g(1, -1) + 2 * g(1, 0) + g(1, 1)) - (g(-1, -1) + 2 * g(-1, 0) + g(-1, 1));
      iy[static_cast<std::size_t>(y) * w + x] =
          (g(-1, 1) + 2 * g(0, 1) + g(1, 1)) - (g(-1, -1) + 2 * g(0, -1) + g(1, -1));
    }
  }

  int margin = p.window / 2;
  std::vector<double> score(static_cast<std::size_t>(w) * h, 0.0);
  double global_max = 0.0;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      double xx = 0, xy = 0, yy = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          int sx = std::clamp(x + dx, 0, w - 1);
          int sy = std::clamp(y + dy, 0, h - 1);
          double gx = ix[static_cast<std::size_t>(sy) * w + sx];
          double gy = iy[static_cast<std::size_t>(sy) * w + sx];
          xx += gx * gx;
          xy += gx * gy;
          yy += gy * gy;
        }
      }
      score[static_cast<std::size_t>(y) * w + x] = min_eig(xx, xy, yy);
      global_max = std::max(global_max, score[static_cast<std::size_t>(y) * w + x]);
    }
  }
  if (global_max <= 0.0) return {};

  double threshold = p.quality_level * global_max;
  std::vector<FeaturePoint> candidates;
  for (int y = margin; y < h - margin; ++y) {
    for (int x = margin; x < w - margin; ++x) {
      double s = score[static_cast<std::size_t>(y) * w + x];
      if (s < threshold || s <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (score[static_cast<std::size_t>(ny) * w + nx] > s) {
            is_max = false;
            break;
          }
        }
      if (is_max) candidates.push_back({static_cast<double>(x), static_cast<double>(y), s});
    }
  }

  std::sort(candidates.begin(), candidates.end(), [](const FeaturePoint& a, const FeaturePoint& b) {
    if (a.response != b.response) return a.response > b.response;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  std::vector<FeaturePoint> kept;
  double min_d2 = p.min_distance * p.min_distance;
  for (const auto& c : candidates) {
    if (static_cast<int>(kept.size()) >= p.max_corners) break;
    bool ok = true;
    for (const auto& k : kept) {
      double dx = c.x - k.x, dy = c.y - k.y;
      if (dx * dx + dy * dy < min_d2) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(c);
  }
  return kept;
}

std::vector<Frame> build_pyramid(const Frame& gray, int levels) {
  require_gray(gray, "build_pyramid");
  if (levels < 1) throw std::invalid_argument("build_pyramid: levels must be >= 1");

  std::vector<Frame> pyr;
  pyr.push_back(gray);
  for (int l = 1; l < levels; ++l) {
    const Frame& src = pyr.back();
    int w = src.width(), h = src.height();
    int nw = (w + 1) / 2, nh = (h + 1) / 2;
    if (nw < 2 || nh < 2)
      throw std::invalid_argument("build_pyramid: too many levels for image size");

    static constexpr double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    std::vector<double> tmp(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = 0;
        for (int t = -2; t <= 2; ++t) acc += k[t + 2] * src.gray_at(x + t, y);
        tmp[static_cast<std::size_t>(y) * w + x] = acc;
      }
    std::vector<std::uint8_t> out(static_cast<std::size_t>(nw) * nh);
    for (int y = 0; y < nh; ++y)
      for (int x = 0; x < nw; ++x) {
        double acc = 0;
        for (int t = -2; t <= 2; ++t) {
          int sy = std::clamp(2 * y + t, 0, h - 1);
          acc += k[t + 2] * tmp[static_cast<std::size_t>(sy) * w + 2 * x];
        }
        out[static_cast<std::size_t>(y) * nw + x] =
            static_cast<std::uint8_t>(std::clamp<long>(std::lround(acc), 0, 255));
      }
    pyr.emplace_back(src.seq(), src.timestamp_ms(), nw, nh, PixelFormat::GRAY8, std::move(out));
  }
  return pyr;
}

std::vector<TrackedPoint> lk_track(const std::vector<Frame>& prev_pyr,
                                   const std::vector<Frame>& next_pyr,
                                   const std::vector<FeaturePoint>& points,
                                   const FlowParams& p) {
  p.validate();
  if (prev_pyr.empty() || prev_pyr.size() != next_pyr.size())
    throw std::invalid_argument("lk_track: mismatched pyramids");
  for (std::size_t l = 0; l < prev_pyr.size(); ++l) {
    if (prev_pyr[l].width() != next_pyr[l].width() ||
        prev_pyr[l].height() != next_pyr[l].height())
      throw std::invalid_argument("lk_track: mismatched pyramids");
  }

  int levels = static_cast<int>(prev_pyr.size());
  int r = p.window / 2;
  double eig_floor = 1e-4 * p.window * p.window;

  std::vector<TrackedPoint> out;
  out.reserve(points.size());
  for (const auto& pt : points) {
    TrackedPoint tp;
    tp.prev = {pt.x, pt.y};
    tp.status = TrackedPoint::Status::OK;

    double gx = 0.0, gy = 0.0;  // accumulated guess, in coords of level below
    double residual = 0.0;
    for (int l = levels - 1; l >= 0 && tp.status == TrackedPoint::Status::OK; --l) {
      const Frame& prev = prev_pyr[l];
      const Frame& next = next_pyr[l];
      double scale = std::pow(2.0, l);
      double px = pt.x / scale;
      double py = pt.y / scale;
      if (px < 0 || py < 0 || px > prev.width() - 1 || py > prev.height() - 1) {
        tp.status = TrackedPoint::Status::LOST;
        break;
      }

      // spatial gradients of prev over the window, fixed for all iterations
      double gxx = 0, gxy = 0, gyy = 0;
      std::vector<double> grad_x(static_cast<std::size_t>(p.window) * p.window);
      std::vector<double> grad_y(static_cast<std::size_t>(p.window) * p.window);
      std::vector<double> base(static_cast<std::size_t>(p.window) * p.window);
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          double sx = px + dx, sy = py + dy;
          double dxv = 0.5 * (sample(prev, sx + 1, sy) - sample(prev, sx - 1, sy));
          double dyv = 0.5 * (sample(prev, sx, sy + 1) - sample(prev, sx, sy - 1));
          std::size_t idx = static_cast<std::size_t>(dy + r) * p.window + (dx + r);
          grad_x[idx] = dxv;
          grad_y[idx] = dyv;
          base[idx] = sample(prev, sx, sy);
          gxx += dxv * dxv;
          gxy += dxv * dyv;
          gyy += dyv * dyv;
        }
      if (min_eig(gxx, gxy, gyy) < eig_floor) {
        tp.status = TrackedPoint::Status::LOST;
        break;
      }
      double det = gxx * gyy - gxy * gxy;

      double vx = 0.0, vy = 0.0;  // refinement at this level
      for (int it = 0; it < p.max_iterations; ++it) {
        double bx = 0, by = 0, abs_sum = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            std::size_t idx = static_cast<std::size_t>(dy + r) * p.window + (dx + r);
            double nxs = px + gx + vx + dx;
            double nys = py + gy + vy + dy;
            double diff = base[idx] - sample(next, nxs, nys);
            bx += diff * grad_x[idx];
            by += diff * grad_y[idx];
            abs_sum += std::abs(diff);
          }
        double ux = (gyy * bx - gxy * by) / det;
        double uy = (gxx * by - gxy * bx) / det;
        vx += ux;
        vy += uy;
        residual = abs_sum / (static_cast<double>(p.window) * p.window);
        if (std::hypot(ux, uy) < p.epsilon) break;
      }

      double nx = px + gx + vx, ny = py + gy + vy;
      if (nx < 0 || ny < 0 || nx > next.width() - 1 || ny > next.height() - 1) {
        tp.status = TrackedPoint::Status::LOST;
        break;
      }
      if (l > 0) {
        gx = 2.0 * (gx + vx);
        gy = 2.0 * (gy + vy);
      } else {
        tp.next = {nx, ny};
        tp.residual = residual;
      }
    }
    out.push_back(tp);
  }
  return out;
}

std::optional<MotionEstimate> box_motion(const std::vector<TrackedPoint>& tracked,
                                         const BBox& box, int min_support) {
  std::vector<double> dxs, dys;
  for (const auto& t : tracked) {
    if (t.status != TrackedPoint::Status::OK) continue;
    if (!box.contains(t.prev.x, t.prev.y)) continue;
    dxs.push_back(t.next.x - t.prev.x);
    dys.push_back(t.next.y - t.prev.y);
  }
  int support = static_cast<int>(dxs.size());
  if (support < min_support || support == 0) return std::nullopt;

  auto median = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return make_motion(median(dxs), median(dys), support);
}

}  // namespace traffic
