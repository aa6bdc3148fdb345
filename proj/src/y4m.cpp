#include <cctype>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "traffic/video_io.hpp"

namespace traffic {

namespace {

constexpr char kStreamMagic[] = "YUV4MPEG2";
constexpr char kFrameMagic[] = "FRAME";

bool supported_colorspace(const std::string& cs) {
  return cs == "C420jpeg" || cs == "C420" || cs == "C420mpeg2";
}

int parse_positive_int(const std::string& text, const std::string& what) {
  if (text.empty()) throw FormatError("y4m: empty " + what + " parameter");
  long v = 0;
  for (char c : text) {
    if (!std::isdigit(static_cast<unsigned char>(c))) {
      throw FormatError("y4m: non-numeric " + what + " parameter '" + text + "'");
    }
    v = v * 10 + (c - '0');
    if (v > 1 << 30) throw FormatError("y4m: " + what + " parameter out of range");
  }
  if (v <= 0) throw FormatError("y4m: " + what + " must be positive");
  return static_cast<int>(v);
}

std::pair<int, int> parse_ratio(const std::string& text, const std::string& what) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw FormatError("y4m: " + what + " parameter '" + text + "' is not n:d");
  }
  return {parse_positive_int(text.substr(0, colon), what + " numerator"),
          parse_positive_int(text.substr(colon + 1), what + " denominator")};
}

}  // namespace

std::size_t Y4mHeader::frame_bytes() const {
  return Frame::buffer_size(PixelFormat::YCbCr420, width, height);
}

double Y4mHeader::frame_interval_ms() const {
  return 1000.0 * fps_den / fps_num;
}

std::string Y4mHeader::line() const {
  std::ostringstream os;
  os << kStreamMagic << " W" << width << " H" << height << " F" << fps_num << ':'
     << fps_den << " I" << interlace << " A" << aspect_num << ':' << aspect_den
     << " " << colorspace;
  for (const auto& extra : extras) os << ' ' << extra;
  os << '\n';
  return os.str();
}

Y4mHeader y4m_read_header(std::istream& in) {
  char magic[sizeof(kStreamMagic) - 1];
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      std::memcmp(magic, kStreamMagic, sizeof(magic)) != 0) {
    throw FormatError("y4m: bad magic, expected YUV4MPEG2");
  }

  std::string line;
  if (!std::getline(in, line)) throw FormatError("y4m: unterminated header line");

  Y4mHeader hdr;
  bool have_w = false;
  bool have_h = false;
  std::istringstream params(line);
  std::string tok;
  while (params >> tok) {
    switch (tok[0]) {
      case 'W':
        hdr.width = parse_positive_int(tok.substr(1), "W");
        have_w = true;
        break;
      case 'H':
        hdr.height = parse_positive_int(tok.substr(1), "H");
        have_h = true;
        break;
      case 'F': {
        auto [n, d] = parse_ratio(tok.substr(1), "F");
        hdr.fps_num = n;
        hdr.fps_den = d;
        break;
      }
      case 'I':
        if (tok.size() != 2) throw FormatError("y4m: malformed I parameter '" + tok + "'");
        hdr.interlace = tok[1];
        break;
      case 'A': {
        auto [n, d] = parse_ratio(tok.substr(1), "A");
        hdr.aspect_num = n;
        hdr.aspect_den = d;
        break;
      }
      case 'C':
        hdr.colorspace = tok;
        break;
      default:
        hdr.extras.push_back(tok);
        break;
    }
  }
  if (!have_w || !have_h) throw FormatError("y4m: header missing W or H");
  if (!supported_colorspace(hdr.colorspace)) {
    throw FormatError("y4m: unsupported colorspace '" + hdr.colorspace +
                      "' (only 4:2:0 streams are accepted)");
  }
  if (hdr.width % 2 != 0 || hdr.height % 2 != 0) {
    throw FormatError("y4m: 4:2:0 requires even dimensions");
  }
  return hdr;
}

Y4mReader::Y4mReader(std::istream& in) : in_(in), header_(y4m_read_header(in)) {
  const auto pos = in_.tellg();
  if (pos >= 0) offset_ = static_cast<std::size_t>(pos);
}

std::optional<Frame> Y4mReader::next() {
  char magic[sizeof(kFrameMagic) - 1];
  in_.read(magic, sizeof(magic));
  if (in_.gcount() == 0) return std::nullopt;  // clean end of stream
  if (in_.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      std::memcmp(magic, kFrameMagic, sizeof(magic)) != 0) {
    throw FormatError("y4m: missing FRAME marker at byte offset " +
                      std::to_string(offset_));
  }
  offset_ += sizeof(magic);
  // Optional frame parameters up to 0x0A.
  for (;;) {
    const int c = in_.get();
    if (c == EOF) {
      throw FormatError("y4m: unterminated FRAME header at byte offset " +
                        std::to_string(offset_));
    }
    ++offset_;
    if (c == '\n') break;
  }
  std::vector<std::uint8_t> data(header_.frame_bytes());
  in_.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(data.size()));
  if (in_.gcount() != static_cast<std::streamsize>(data.size())) {
    throw FormatError("y4m: truncated frame at byte offset " +
                      std::to_string(offset_ + static_cast<std::size_t>(in_.gcount())));
  }
  offset_ += data.size();
  const std::int64_t seq = next_seq_++;
  return Frame(seq, seq * header_.frame_interval_ms(), header_.width, header_.height,
               PixelFormat::YCbCr420, std::move(data));
}

Y4mWriter::Y4mWriter(std::ostream& out, Y4mHeader header)
    : out_(out), header_(std::move(header)) {
  if (!supported_colorspace(header_.colorspace)) {
    throw FormatError("y4m: unsupported colorspace '" + header_.colorspace + "'");
  }
  const std::string line = header_.line();
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  bytes_ += line.size();
}

void Y4mWriter::write(const Frame& frame) {
  if (frame.format() != PixelFormat::YCbCr420 || frame.width() != header_.width ||
      frame.height() != header_.height) {
    throw FormatError("y4m: frame format/dims do not match header");
  }
  out_.write("FRAME\n", 6);
  out_.write(reinterpret_cast<const char*>(frame.data().data()),
             static_cast<std::streamsize>(frame.data().size()));
  bytes_ += 6 + frame.data().size();
  if (!out_) throw FormatError("y4m: write failed");
}

std::size_t y4m_write(const std::vector<Frame>& frames, const Y4mHeader& header,
                      std::ostream& out) {
  Y4mWriter writer(out, header);
  for (const auto& f : frames) writer.write(f);
  return writer.bytes_written();
}

}  // namespace traffic
