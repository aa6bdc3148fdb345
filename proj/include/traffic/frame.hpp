#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace traffic {

enum class PixelFormat { GRAY8, RGB24, YCbCr420 };

std::string to_string(PixelFormat f);

// One decoded video frame. Immutable after construction; safe to hand
// between pipeline workers.
class Frame {
 public:
  Frame(std::int64_t seq, double timestamp_ms, int width, int height,
        PixelFormat format, std::vector<std::uint8_t> pixels);

  static std::size_t buffer_size(PixelFormat format, int width, int height);

  std::int64_t seq() const { return seq_; }
  double timestamp_ms() const { return timestamp_ms_; }
  int width() const { return width_; }
  int height() const { return height_; }
  PixelFormat format() const { return format_; }
  std::span<const std::uint8_t> data() const { return pixels_; }

  // Plane views for YCbCr420 (luma full-res, chroma half-res).
  std::span<const std::uint8_t> luma() const;
  std::span<const std::uint8_t> cb() const;
  std::span<const std::uint8_t> cr() const;

  // GRAY8 pixel access with replicate-edge clamping.
  std::uint8_t gray_at(int x, int y) const;

  // RGB24 pixel access, channel c in {0,1,2}.
  std::uint8_t rgb_at(int x, int y, int c) const;

  Frame with_seq(std::int64_t seq, double timestamp_ms) const;

 private:
  std::int64_t seq_;
  double timestamp_ms_;
  int width_;
  int height_;
  PixelFormat format_;
  std::vector<std::uint8_t> pixels_;
};

}  // namespace traffic
