#include "liftwave/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "liftwave/errors.hpp"

namespace liftwave {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for '" + path + "'");
}

namespace {

// Next whitespace-delimited header integer, skipping '#' comments.
int header_int(const std::vector<std::uint8_t>& b, std::size_t& pos, const std::string& name) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError(name + ": malformed PNM header", pos);
  long v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + (b[pos++] - '0');
    if (v > (1 << 24)) throw FormatError(name + ": PNM header value too large", pos);
  }
  return static_cast<int>(v);
}

}  // namespace

Tensor parse_pnm(const std::vector<std::uint8_t>& b, const std::string& name) {
  if (b.size() < 2 || b[0] != 'P' || (b[1] != '5' && b[1] != '6'))
    throw FormatError(name + ": not a binary PGM/PPM file", 0);
  const bool color = b[1] == '6';
  std::size_t pos = 2;
  const int w = header_int(b, pos, name);
  const int h = header_int(b, pos, name);
  const int maxval = header_int(b, pos, name);
  if (w < 1 || h < 1) throw FormatError(name + ": empty image", pos);
  if (maxval < 1 || maxval > 255) throw FormatError(name + ": only 8-bit PNM is supported", pos);
  if (pos >= b.size() || !std::isspace(b[pos])) throw FormatError(name + ": malformed PNM header", pos);
  ++pos;
  const std::size_t need = static_cast<std::size_t>(w) * h * (color ? 3 : 1);
  if (b.size() - pos < need) throw FormatError(name + ": truncated pixel data", b.size());
  Tensor img(1, h, w);
  const double scale = 255.0 / maxval;
  for (std::size_t i = 0; i < static_cast<std::size_t>(w) * h; ++i) {
    if (color) {
      const std::uint8_t* p = &b[pos + 3 * i];
      img[i] = scale * (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
    } else {
      img[i] = scale * b[pos + i];
    }
  }
  return img;
}

Tensor read_image(const std::string& path) { return parse_pnm(read_file(path), path); }

Tensor round_to_pixels(const Tensor& image) {
  Tensor out = image;
  for (double& v : out.values()) v = std::clamp(std::nearbyint(v), 0.0, 255.0);
  return out;
}

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.rank() != 3 || image.channels() != 1) throw InputError("write_pgm expects a single plane");
  const std::string head = "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(head.begin(), head.end());
  const Tensor px = round_to_pixels(image);
  for (double v : px.values()) bytes.push_back(static_cast<std::uint8_t>(v));
  write_file(path, bytes);
}

}  // namespace liftwave
