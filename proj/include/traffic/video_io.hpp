#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "traffic/frame.hpp"

namespace traffic {

// Parse failures carry the byte offset (Y4M) or a short reason; message is
// preformatted for operators.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Y4mHeader {
  int width = 0;
  int height = 0;
  int fps_num = 30;
  int fps_den = 1;
  char interlace = 'p';
  int aspect_num = 1;
  int aspect_den = 1;
  std::string colorspace = "C420jpeg";  // C420jpeg, C420, C420mpeg2
  std::vector<std::string> extras;      // unknown parameters, preserved verbatim

  std::size_t frame_bytes() const;
  double frame_interval_ms() const;
  std::string line() const;  // the exact header line including trailing '\n'
};

// Reads the stream header ("YUV4MPEG2" + space-delimited parameters,
// terminated by 0x0A). Missing F defaults to 30:1, missing C to C420jpeg.
Y4mHeader y4m_read_header(std::istream& in);

// Sequential frame reader; assigns seq 0,1,2,... and timestamps from fps.
class Y4mReader {
 public:
  explicit Y4mReader(std::istream& in);
  const Y4mHeader& header() const { return header_; }
  std::optional<Frame> next();

 private:
  std::istream& in_;
  Y4mHeader header_;
  std::int64_t next_seq_ = 0;
  std::size_t offset_ = 0;  // bytes consumed, for truncation diagnostics
};

class Y4mWriter {
 public:
  Y4mWriter(std::ostream& out, Y4mHeader header);
  void write(const Frame& frame);  // YCbCr420, dims must match the header
  std::size_t bytes_written() const { return bytes_; }

 private:
  std::ostream& out_;
  Y4mHeader header_;
  std::size_t bytes_ = 0;
};

// Convenience whole-stream write; returns total byte count.
std::size_t y4m_write(const std::vector<Frame>& frames, const Y4mHeader& header,
                      std::ostream& out);

// PPM (P6, maxval 255) and PGM (P5, maxval 255); binary, comments tolerated
// in the header. Round trips are byte-identical.
Frame ppm_read(std::istream& in);
Frame ppm_read_file(const std::string& path);
void ppm_write(const Frame& rgb, std::ostream& out);
void ppm_write_file(const Frame& rgb, const std::string& path);

Frame pgm_read(std::istream& in);
Frame pgm_read_file(const std::string& path);
void pgm_write(const Frame& gray, std::ostream& out);
void pgm_write_file(const Frame& gray, const std::string& path);

// Color conversions. BT.601 luma weights; YCbCr is full-swing (the JPEG
// mapping that C420jpeg streams carry). Results round half away from zero
// and clamp to [0,255].
Frame to_gray(const Frame& src);
Frame ycbcr_to_rgb(const Frame& src);
Frame rgb_to_ycbcr420(const Frame& src);
Frame gray_to_ycbcr420(const Frame& src);
Frame gray_to_rgb(const Frame& src);

}  // namespace traffic
