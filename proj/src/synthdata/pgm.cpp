#include "fedgrain/synthdata/pgm.hpp"

#include <cctype>
#include <cmath>

#include "fedgrain/common/digest.hpp"

namespace fedgrain::synth {

namespace {

std::string header(std::size_t h, std::size_t w, unsigned maxval) {
  return "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
}

struct PgmHeader {
  std::size_t width = 0, height = 0;
  unsigned long maxval = 0;
  std::size_t data_offset = 0;
};

PgmHeader parse_header(std::string_view b) {
  std::size_t pos = 0;
  if (b.size() < 2 || b[0] != 'P' || b[1] != '5') throw FormatError("pgm: bad magic, expected P5", 0);
  pos = 2;
  auto skip_space = [&] {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(b[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&](const char* what) -> unsigned long {
    skip_space();
    const std::size_t start = pos;
    unsigned long v = 0;
    while (pos < b.size() && std::isdigit(static_cast<unsigned char>(b[pos]))) {
      v = v * 10 + static_cast<unsigned long>(b[pos] - '0');
      if (v > (1UL << 24)) throw FormatError(std::string("pgm: ") + what + " too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError(std::string("pgm: expected ") + what, pos);
    return v;
  };
  PgmHeader h;
  h.width = number("width");
  h.height = number("height");
  h.maxval = number("maxval");
  if (h.width == 0 || h.height == 0) throw FormatError("pgm: zero dimension", pos);
  if (h.maxval == 0 || h.maxval > 65535) throw FormatError("pgm: maxval out of range", pos);
  if (pos >= b.size() || !std::isspace(static_cast<unsigned char>(b[pos])))
    throw FormatError("pgm: missing whitespace after maxval", pos);
  h.data_offset = pos + 1;
  return h;
}

void require_data(std::string_view b, const PgmHeader& h, std::size_t bytes_per_pixel) {
  const std::size_t need = h.width * h.height * bytes_per_pixel;
  const std::size_t have = b.size() - h.data_offset;
  if (have < need) throw FormatError("pgm: truncated pixel data, need " + std::to_string(need) + " bytes", b.size());
  if (have > need) throw FormatError("pgm: trailing bytes after pixel data", h.data_offset + need);
}

}  // namespace

std::string encode_pgm(const GrayImage& image) {
  std::string out = header(image.height(), image.width(), 255);
  for (double v : image.pixels()) {
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError("pgm: gray intensity outside [0, 1]", out.size());
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  return out;
}

std::string encode_pgm(const LabelMap& labels) {
  std::string out = header(labels.height(), labels.width(), 255);
  for (auto v : labels.pixels()) {
    if (v > 1) throw FormatError("pgm: label value outside {0, 1}", out.size());
    out.push_back(static_cast<char>(v ? 255 : 0));
  }
  return out;
}

std::string encode_pgm(const InstanceMap& instances) {
  std::string out = header(instances.height(), instances.width(), 65535);
  for (auto v : instances.pixels()) {
    if (v > 65535) throw FormatError("pgm: instance id exceeds 16 bits", out.size());
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
  }
  return out;
}

GrayImage decode_gray_pgm(std::string_view b) {
  const PgmHeader h = parse_header(b);
  if (h.maxval != 255) throw FormatError("pgm: gray image must have maxval 255, got " + std::to_string(h.maxval), 0);
  require_data(b, h, 1);
  GrayImage out(h.height, h.width);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(static_cast<unsigned char>(b[h.data_offset + i])) / 255.0;
  return out;
}

LabelMap decode_label_pgm(std::string_view b) {
  const PgmHeader h = parse_header(b);
  if (h.maxval != 255) throw FormatError("pgm: label map must have maxval 255, got " + std::to_string(h.maxval), 0);
  require_data(b, h, 1);
  LabelMap out(h.height, h.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto v = static_cast<unsigned char>(b[h.data_offset + i]);
    if (v != 0 && v != 255) throw FormatError("pgm: label value " + std::to_string(v) + " not in {0, 255}", h.data_offset + i);
    out[i] = v ? kGrain : kBoundary;
  }
  return out;
}

InstanceMap decode_instance_pgm(std::string_view b) {
  const PgmHeader h = parse_header(b);
  if (h.maxval != 65535)
    throw FormatError("pgm: instance map must have maxval 65535, got " + std::to_string(h.maxval), 0);
  require_data(b, h, 2);
  InstanceMap out(h.height, h.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto hi = static_cast<unsigned char>(b[h.data_offset + 2 * i]);
    const auto lo = static_cast<unsigned char>(b[h.data_offset + 2 * i + 1]);
    out[i] = (static_cast<std::uint32_t>(hi) << 8) | lo;
  }
  return out;
}

void save_image(const std::filesystem::path& path, const GrayImage& image) { write_file(path, encode_pgm(image)); }
void save_image(const std::filesystem::path& path, const LabelMap& labels) { write_file(path, encode_pgm(labels)); }
void save_image(const std::filesystem::path& path, const InstanceMap& instances) {
  write_file(path, encode_pgm(instances));
}

GrayImage load_gray_image(const std::filesystem::path& path) { return decode_gray_pgm(read_file(path)); }
LabelMap load_label_map(const std::filesystem::path& path) { return decode_label_pgm(read_file(path)); }
InstanceMap load_instance_map(const std::filesystem::path& path) { return decode_instance_pgm(read_file(path)); }

}  // namespace fedgrain::synth
