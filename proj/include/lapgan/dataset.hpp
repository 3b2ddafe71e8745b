#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lapgan/image.hpp"

namespace lapgan {

/// Uniform-size image collection with optional class labels.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;  // empty, or one per image
  std::size_t classes = 0;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
  bool labeled() const noexcept { return !labels.empty(); }
  Extent extent() const;
  std::size_t channels() const;

  /// Throws InvalidArgument on mixed sizes, bad labels or non-finite pixels.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

float byte_to_unit(std::uint8_t v);
std::uint8_t unit_to_byte(float v);

/// Fixed-size binary records: one label byte then channel-major pixel bytes.
struct RecordLayout {
  std::size_t channels = 3;
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t classes = 10;

  std::size_t record_bytes() const { return 1 + channels * height * width; }
};

inline constexpr RecordLayout kCifarLayout{};

Dataset decode_records(std::span<const std::uint8_t> bytes, const RecordLayout& layout);
Dataset load_records(const std::filesystem::path& path, const RecordLayout& layout);
Dataset load_cifar_binary(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_records(const Dataset& ds);
void write_records(const std::filesystem::path& path, const Dataset& ds);

enum class CropMode { four_corners, random };

std::string_view to_string(CropMode mode);
CropMode parse_crop_mode(std::string_view name);

/// Four windows per image. Corner mode emits top-left, top-right,
/// bottom-left, bottom-right in that order; random mode draws offsets from `seed`.
Dataset crop_augment(const Dataset& ds, Extent crop, CropMode mode = CropMode::four_corners, std::uint64_t seed = 0);

struct Splits {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Shuffles with `seed` and cuts consecutive runs of floor(f * n) items.
/// Accepts one to three fractions; missing ones are zero.
Splits split(const Dataset& ds, std::span<const double> fractions, std::uint64_t seed);

}  // namespace lapgan
