#include "traffic/frame.hpp"

#include <algorithm>
#include <stdexcept>

namespace traffic {

std::string to_string(PixelFormat f) {
  switch (f) {
    case PixelFormat::GRAY8: return "GRAY8";
    case PixelFormat::RGB24: return "RGB24";
    case PixelFormat::YCbCr420: return "YCbCr420";
  }
  return "?";
}

std::size_t Frame::buffer_size(PixelFormat format, int width, int height) {
  const std::size_t w = static_cast<std::size_t>(width);
  const std::size_t h = static_cast<std::size_t>(height);
  switch (format) {
    case PixelFormat::GRAY8: return w * h;
    case PixelFormat::RGB24: return 3 * w * h;
    case PixelFormat::YCbCr420: return w * h + 2 * (((w + 1) / 2) * ((h + 1) / 2));
  }
  throw std::invalid_argument("Frame: unknown pixel format");
}

Frame::Frame(std::int64_t seq, double timestamp_ms, int width, int height,
             PixelFormat format, std::vector<std::uint8_t> pixels)
    : seq_(seq),
      timestamp_ms_(timestamp_ms),
      width_(width),
      height_(height),
      format_(format),
      pixels_(std::move(pixels)) {
  if (seq < 0) throw std::invalid_argument("Frame: seq must be non-negative");
  if (width <= 0 || height <= 0) {
    throw std::invalid_argument("Frame: dims must be positive");
  }
  if (format == PixelFormat::YCbCr420 && (width % 2 != 0 || height % 2 != 0)) {
    throw std::invalid_argument("Frame: YCbCr420 requires even dims");
  }
  if (pixels_.size() != buffer_size(format, width, height)) {
    throw std::invalid_argument("Frame: buffer length does not match format " +
                                to_string(format));
  }
}

std::span<const std::uint8_t> Frame::luma() const {
  if (format_ != PixelFormat::YCbCr420) {
    throw std::logic_error("Frame::luma: not YCbCr420");
  }
  return {pixels_.data(), static_cast<std::size_t>(width_) * height_};
}

std::span<const std::uint8_t> Frame::cb() const {
  if (format_ != PixelFormat::YCbCr420) {
    throw std::logic_error("Frame::cb: not YCbCr420");
  }
  const std::size_t luma_n = static_cast<std::size_t>(width_) * height_;
  const std::size_t chroma_n = static_cast<std::size_t>(width_ / 2) * (height_ / 2);
  return {pixels_.data() + luma_n, chroma_n};
}

std::span<const std::uint8_t> Frame::cr() const {
  if (format_ != PixelFormat::YCbCr420) {
    throw std::logic_error("Frame::cr: not YCbCr420");
  }
  const std::size_t luma_n = static_cast<std::size_t>(width_) * height_;
  const std::size_t chroma_n = static_cast<std::size_t>(width_ / 2) * (height_ / 2);
  return {pixels_.data() + luma_n + chroma_n, chroma_n};
}

std::uint8_t Frame::gray_at(int x, int y) const {
  if (format_ != PixelFormat::GRAY8) {
    throw std::logic_error("Frame::gray_at: not GRAY8");
  }
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return pixels_[static_cast<std::size_t>(y) * width_ + x];
}

std::uint8_t Frame::rgb_at(int x, int y, int c) const {
  if (format_ != PixelFormat::RGB24) {
    throw std::logic_error("Frame::rgb_at: not RGB24");
  }
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return pixels_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
}

Frame Frame::with_seq(std::int64_t seq, double timestamp_ms) const {
  return Frame(seq, timestamp_ms, width_, height_, format_, pixels_);
}

}  // namespace traffic
