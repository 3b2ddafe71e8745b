#include "lapgan/pnm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>
#include <string>

#include "lapgan/dataset.hpp"
#include "lapgan/errors.hpp"

namespace lapgan {

std::vector<char> encode_pnm(const Image& img) {
  if (img.channels() != 1 && img.channels() != 3)
    throw InvalidArgument("PNM output needs 1 or 3 channels, got " + std::to_string(img.channels()));
  const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" + std::to_string(img.width()) +
                             " " + std::to_string(img.height()) + "\n255\n";
  std::vector<char> out(header.begin(), header.end());
  for (std::size_t y = 0; y < img.height(); ++y)
    for (std::size_t x = 0; x < img.width(); ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) out.push_back(static_cast<char>(unit_to_byte(img.at(c, y, x))));
  return out;
}

namespace {

struct Cursor {
  std::span<const char> bytes;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t number() {
    skip_space();
    const std::size_t start = pos;
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw CorruptData("PNM header value too large", start);
      ++pos;
    }
    if (pos == start) throw CorruptData("expected a number in PNM header", start);
    return v;
  }
};

}  // namespace

Image decode_pnm(std::span<const char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw CorruptData("not a binary PGM/PPM file", 0);
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  Cursor cur{bytes, 2};
  const std::size_t w = cur.number();
  const std::size_t h = cur.number();
  const std::size_t maxval = cur.number();
  if (w == 0 || h == 0) throw CorruptData("PNM image has no pixels", cur.pos);
  if (maxval != 255) throw CorruptData("only 8-bit PNM files are supported", cur.pos);
  if (cur.pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[cur.pos])))
    throw CorruptData("missing separator after PNM header", cur.pos);
  ++cur.pos;
  const std::size_t need = w * h * channels;
  if (bytes.size() - cur.pos < need) throw CorruptData("truncated PNM pixel data", bytes.size());

  Image img(channels, h, w);
  std::size_t p = cur.pos;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c) img.at(c, y, x) = byte_to_unit(static_cast<std::uint8_t>(bytes[p++]));
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& img) {
  const auto bytes = encode_pnm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

Image tile(std::span<const Image> images, std::size_t columns, float gutter) {
  if (images.empty() || columns == 0) throw InvalidArgument("tile needs images and at least one column");
  const Image& first = images.front();
  const std::size_t rows = (images.size() + columns - 1) / columns;
  const std::size_t h = first.height(), w = first.width();
  Image sheet(first.channels(), rows * (h + 1) - 1, columns * (w + 1) - 1, gutter);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].extent() != first.extent() || images[i].channels() != first.channels())
      throw InvalidArgument("tile needs equally sized images");
    const std::size_t oy = (i / columns) * (h + 1), ox = (i % columns) * (w + 1);
    for (std::size_t c = 0; c < first.channels(); ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) sheet.at(c, oy + y, ox + x) = images[i].at(c, y, x);
  }
  return sheet;
}

}  // namespace lapgan
