#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "lapgan/image.hpp"

namespace lapgan {

/// Binary PGM (1 channel) or PPM (3 channels). Pixels in [-1, 1] map to
/// bytes as round((x + 1) * 127.5) after clamping.
std::vector<char> encode_pnm(const Image& img);
Image decode_pnm(std::span<const char> bytes);

void write_pnm(const std::filesystem::path& path, const Image& img);
Image read_pnm(const std::filesystem::path& path);

/// Row-major sheet of equally sized images with a one-pixel gutter.
Image tile(std::span<const Image> images, std::size_t columns, float gutter = -1.0f);

}  // namespace lapgan
