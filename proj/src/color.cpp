#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "traffic/video_io.hpp"

namespace traffic {

namespace {

std::uint8_t clamp_round(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v), 0, 255));
}

std::uint8_t luma_of(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return clamp_round(0.299 * r + 0.587 * g + 0.114 * b);
}

}  // namespace

Frame to_gray(const Frame& src) {
  const int w = src.width();
  const int h = src.height();
  switch (src.format()) {
    case PixelFormat::GRAY8:
      return src;
    case PixelFormat::RGB24: {
      std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * h);
      const auto px = src.data();
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = luma_of(px[3 * i], px[3 * i + 1], px[3 * i + 2]);
      }
      return Frame(src.seq(), src.timestamp_ms(), w, h, PixelFormat::GRAY8, std::move(out));
    }
    case PixelFormat::YCbCr420: {
      // Full-swing luma is already the BT.601 gray channel.
      auto y = src.luma();
      return Frame(src.seq(), src.timestamp_ms(), w, h, PixelFormat::GRAY8,
                   std::vector<std::uint8_t>(y.begin(), y.end()));
    }
  }
  throw std::logic_error("to_gray: unknown format");
}

Frame ycbcr_to_rgb(const Frame& src) {
  if (src.format() != PixelFormat::YCbCr420) {
    throw std::invalid_argument("ycbcr_to_rgb: source must be YCbCr420");
  }
  const int w = src.width();
  const int h = src.height();
  const int cw = w / 2;
  auto y = src.luma();
  auto cb = src.cb();
  auto cr = src.cr();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(3) * w * h);
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const double Y = y[static_cast<std::size_t>(row) * w + col];
      const std::size_t ci = static_cast<std::size_t>(row / 2) * cw + col / 2;
      const double Cb = cb[ci] - 128.0;
      const double Cr = cr[ci] - 128.0;
      const std::size_t o = (static_cast<std::size_t>(row) * w + col) * 3;
      out[o] = clamp_round(Y + 1.402 * Cr);
      out[o + 1] = clamp_round(Y - 0.344136 * Cb - 0.714136 * Cr);
      out[o + 2] = clamp_round(Y + 1.772 * Cb);
    }
  }
  return Frame(src.seq(), src.timestamp_ms(), w, h, PixelFormat::RGB24, std::move(out));
}

Frame rgb_to_ycbcr420(const Frame& src) {
  if (src.format() != PixelFormat::RGB24) {
    throw std::invalid_argument("rgb_to_ycbcr420: source must be RGB24");
  }
  const int w = src.width();
  const int h = src.height();
  if (w % 2 != 0 || h % 2 != 0) {
    throw std::invalid_argument("rgb_to_ycbcr420: even dims required");
  }
  const int cw = w / 2;
  const int ch = h / 2;
  std::vector<std::uint8_t> out(Frame::buffer_size(PixelFormat::YCbCr420, w, h));
  std::uint8_t* yp = out.data();
  std::uint8_t* cbp = yp + static_cast<std::size_t>(w) * h;
  std::uint8_t* crp = cbp + static_cast<std::size_t>(cw) * ch;
  const auto px = src.data();
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      const std::size_t i = (static_cast<std::size_t>(row) * w + col) * 3;
      yp[static_cast<std::size_t>(row) * w + col] = luma_of(px[i], px[i + 1], px[i + 2]);
    }
  }
  // Chroma from the 2x2 block average of the full-resolution Cb/Cr values.
  for (int row = 0; row < ch; ++row) {
    for (int col = 0; col < cw; ++col) {
      double cb_sum = 0.0;
      double cr_sum = 0.0;
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const std::size_t i =
              (static_cast<std::size_t>(2 * row + dy) * w + 2 * col + dx) * 3;
          const double r = px[i];
          const double g = px[i + 1];
          const double b = px[i + 2];
          cb_sum += 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b;
          cr_sum += 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b;
        }
      }
      cbp[static_cast<std::size_t>(row) * cw + col] = clamp_round(cb_sum / 4.0);
      crp[static_cast<std::size_t>(row) * cw + col] = clamp_round(cr_sum / 4.0);
    }
  }
  return Frame(src.seq(), src.timestamp_ms(), w, h, PixelFormat::YCbCr420, std::move(out));
}

Frame gray_to_ycbcr420(const Frame& src) {
  if (src.format() != PixelFormat::GRAY8) {
    throw std::invalid_argument("gray_to_ycbcr420: source must be GRAY8");
  }
  const int w = src.width();
  const int h = src.height();
  if (w % 2 != 0 || h % 2 != 0) {
    throw std::invalid_argument("gray_to_ycbcr420: even dims required");
  }
  std::vector<std::uint8_t> out(Frame::buffer_size(PixelFormat::YCbCr420, w, h), 128);
  std::copy(src.data().begin(), src.data().end(), out.begin());
  return Frame(src.seq(), src.timestamp_ms(), w, h, PixelFormat::YCbCr420, std::move(out));
}

Frame gray_to_rgb(const Frame& src) {
  if (src.format() != PixelFormat::GRAY8) {
    throw std::invalid_argument("gray_to_rgb: source must be GRAY8");
  }
  std::vector<std::uint8_t> out(src.data().size() * 3);
  const auto px = src.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = px[i];
  }
  return Frame(src.seq(), src.timestamp_ms(), src.width(), src.height(),
               PixelFormat::RGB24, std::move(out));
}

}  // namespace traffic
