#include <fstream>
#include <istream>
#include <ostream>

#include "traffic/video_io.hpp"

namespace traffic {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
int pnm_int(std::istream& in, const char* what) {
  for (;;) {
    const int c = in.peek();
    if (c == EOF) throw FormatError(std::string("pnm: truncated header before ") + what);
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
      continue;
    }
    if (std::isspace(c)) {
      in.get();
      continue;
    }
    break;
  }
  int value = 0;
  if (!(in >> value)) throw FormatError(std::string("pnm: malformed ") + what);
  return value;
}

Frame pnm_read(std::istream& in, bool color) {
  char magic[2] = {0, 0};
  in.read(magic, 2);
  const char expected = color ? '6' : '5';
  if (in.gcount() != 2 || magic[0] != 'P') throw FormatError("pnm: bad magic");
  if (magic[1] == '3' || magic[1] == '2') {
    throw FormatError("pnm: ascii variants unsupported");
  }
  if (magic[1] != expected) {
    throw FormatError(std::string("pnm: expected P") + expected + ", got P" + magic[1]);
  }
  const int w = pnm_int(in, "width");
  const int h = pnm_int(in, "height");
  const int maxval = pnm_int(in, "maxval");
  if (w <= 0 || h <= 0) throw FormatError("pnm: non-positive dimensions");
  if (maxval != 255) {
    throw FormatError("pnm: maxval " + std::to_string(maxval) + " unsupported (must be 255)");
  }
  in.get();  // the single whitespace byte before the raster
  const PixelFormat fmt = color ? PixelFormat::RGB24 : PixelFormat::GRAY8;
  std::vector<std::uint8_t> data(Frame::buffer_size(fmt, w, h));
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (in.gcount() != static_cast<std::streamsize>(data.size())) {
    throw FormatError("pnm: truncated raster");
  }
  return Frame(0, 0.0, w, h, fmt, std::move(data));
}

void pnm_write(const Frame& f, std::ostream& out, bool color) {
  const PixelFormat want = color ? PixelFormat::RGB24 : PixelFormat::GRAY8;
  if (f.format() != want) {
    throw FormatError("pnm: frame format is " + to_string(f.format()) + ", expected " +
                      to_string(want));
  }
  out << (color ? "P6" : "P5") << '\n' << f.width() << ' ' << f.height() << '\n' << "255\n";
  out.write(reinterpret_cast<const char*>(f.data().data()),
            static_cast<std::streamsize>(f.data().size()));
  if (!out) throw FormatError("pnm: write failed");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open for reading: " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  return out;
}

}  // namespace

Frame ppm_read(std::istream& in) { return pnm_read(in, true); }

Frame ppm_read_file(const std::string& path) {
  auto in = open_in(path);
  return ppm_read(in);
}

void ppm_write(const Frame& rgb, std::ostream& out) { pnm_write(rgb, out, true); }

void ppm_write_file(const Frame& rgb, const std::string& path) {
  auto out = open_out(path);
  ppm_write(rgb, out);
}

Frame pgm_read(std::istream& in) { return pnm_read(in, false); }

Frame pgm_read_file(const std::string& path) {
  auto in = open_in(path);
  return pgm_read(in);
}

void pgm_write(const Frame& gray, std::ostream& out) { pnm_write(gray, out, false); }

void pgm_write_file(const Frame& gray, const std::string& path) {
  auto out = open_out(path);
  pgm_write(gray, out);
}

}  // namespace traffic
