#include "lapgan/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "lapgan/errors.hpp"
#include "lapgan/random.hpp"

namespace lapgan {

Extent Dataset::extent() const {
  if (images.empty()) throw InvalidState("dataset is empty");
  return images.front().extent();
}

std::size_t Dataset::channels() const {
  if (images.empty()) throw InvalidState("dataset is empty");
  return images.front().channels();
}

void Dataset::validate() const {
  if (images.empty()) return;
  const Extent e = images.front().extent();
  const std::size_t c = images.front().channels();
  for (const auto& img : images) {
    if (img.extent() != e || img.channels() != c) throw InvalidArgument("dataset images differ in size");
    if (!img.all_finite()) throw InvalidArgument("dataset contains non-finite pixels");
  }
  if (!labels.empty()) {
    if (labels.size() != images.size()) throw InvalidArgument("label count does not match image count");
    for (int l : labels)
      if (l < 0 || static_cast<std::size_t>(l) >= classes) throw InvalidArgument("label out of range");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.classes = classes;
  out.images.reserve(indices.size());
  for (std::size_t i : indices) {
    out.images.push_back(images.at(i));
    if (!labels.empty()) out.labels.push_back(labels[i]);
  }
  return out;
}

float byte_to_unit(std::uint8_t v) { return static_cast<float>(v / 127.5 - 1.0); }

std::uint8_t unit_to_byte(float v) {
  const double x = std::clamp(static_cast<double>(v), -1.0, 1.0);
  return static_cast<std::uint8_t>(std::lround((x + 1.0) * 127.5));
}

Dataset decode_records(std::span<const std::uint8_t> bytes, const RecordLayout& layout) {
  const std::size_t rec = layout.record_bytes();
  if (bytes.size() % rec != 0) {
    throw CorruptData("truncated record: " + std::to_string(bytes.size() % rec) + " of " + std::to_string(rec) +
                          " bytes",
                      bytes.size() - bytes.size() % rec);
  }
  Dataset ds;
  ds.classes = layout.classes;
  const std::size_t n = bytes.size() / rec;
  ds.images.reserve(n);
  ds.labels.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t offset = r * rec;
    const std::uint8_t label = bytes[offset];
    if (label >= layout.classes) {
      throw CorruptData("label " + std::to_string(label) + " outside [0, " + std::to_string(layout.classes - 1) + "]",
                        offset);
    }
    Image img(layout.channels, layout.height, layout.width);
    for (std::size_t i = 0; i < img.size(); ++i) img.values()[i] = byte_to_unit(bytes[offset + 1 + i]);
    ds.images.push_back(std::move(img));
    ds.labels.push_back(label);
  }
  return ds;
}

Dataset load_records(const std::filesystem::path& path, const RecordLayout& layout) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open dataset " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_records(bytes, layout);
}

Dataset load_cifar_binary(const std::filesystem::path& path) { return load_records(path, kCifarLayout); }

std::vector<std::uint8_t> encode_records(const Dataset& ds) {
  ds.validate();
  if (ds.classes > 256) throw InvalidArgument("record format holds at most 256 classes");
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out.push_back(ds.labeled() ? static_cast<std::uint8_t>(ds.labels[i]) : 0);
    for (float v : ds.images[i].values()) out.push_back(unit_to_byte(v));
  }
  return out;
}

void write_records(const std::filesystem::path& path, const Dataset& ds) {
  const auto bytes = encode_records(ds);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string_view to_string(CropMode mode) { return mode == CropMode::random ? "random" : "four-corners"; }

CropMode parse_crop_mode(std::string_view name) {
  if (name == "four-corners") return CropMode::four_corners;
  if (name == "random") return CropMode::random;
  throw InvalidArgument("unknown crop mode '" + std::string(name) + "'");
}

namespace {

Image crop_window(const Image& img, std::size_t y0, std::size_t x0, Extent crop) {
  Image out(img.channels(), crop.height, crop.width);
  for (std::size_t c = 0; c < img.channels(); ++c)
    for (std::size_t y = 0; y < crop.height; ++y)
      for (std::size_t x = 0; x < crop.width; ++x) out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

}  // namespace

Dataset crop_augment(const Dataset& ds, Extent crop, CropMode mode, std::uint64_t seed) {
  if (ds.empty()) return ds;
  const Extent e = ds.extent();
  if (crop.height == 0 || crop.width == 0 || crop.height > e.height || crop.width > e.width)
    throw InvalidArgument("crop " + to_string(crop) + " does not fit inside " + to_string(e));
  const std::size_t dy = e.height - crop.height;
  const std::size_t dx = e.width - crop.width;

  Rng rng(derive_seed(seed, 0xc409));
  Dataset out;
  out.classes = ds.classes;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int w = 0; w < 4; ++w) {
      std::size_t y0, x0;
      if (mode == CropMode::four_corners) {
        y0 = (w / 2) * dy;
        x0 = (w % 2) * dx;
      } else {
        y0 = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(dy + 1));
        x0 = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(dx + 1));
      }
      out.images.push_back(crop_window(ds.images[i], y0, x0, crop));
      if (ds.labeled()) out.labels.push_back(ds.labels[i]);
    }
  }
  return out;
}

Splits split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed) {
  if (fractions.empty() || fractions.size() > 3) throw InvalidArgument("split takes one to three fractions");
  double sum = 0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw InvalidArgument("split fractions must be positive");
    sum += f;
  }
  if (sum > 1.0 + 1e-12) throw InvalidArgument("split fractions sum to more than 1");

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, 0x5b1));
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[j]);
  }

  std::array<Dataset*, 3> parts{};
  Splits out;
  parts = {&out.train, &out.validation, &out.test};
  std::size_t start = 0;
  for (std::size_t p = 0; p < 3; ++p) {
    std::size_t count = 0;
    if (p < fractions.size()) {
      count = static_cast<std::size_t>(std::floor(fractions[p] * static_cast<double>(ds.size()) + 1e-9));
      count = std::min(count, ds.size() - start);
    }
    *parts[p] = ds.subset(std::span(order).subspan(start, count));
    start += count;
  }
  return out;
}

}  // namespace lapgan
