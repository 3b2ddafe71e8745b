#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lapgan/dataset.hpp"
#include "lapgan/pyramid.hpp"

namespace lapgan {

enum class SyntheticKind { multiscale_texture, gaussian_blobs, two_mode_mixture };

std::string_view to_string(SyntheticKind kind);
SyntheticKind parse_synthetic_kind(std::string_view name);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::multiscale_texture;
  Extent size{16, 16};
  std::size_t channels = 1;
  std::size_t count = 1000;
  std::uint64_t seed = 0;

  // multiscale-texture: target RMS of h_k for k = 0..K over the automatic
  // schedule of `size`. Empty means default_band_rms().
  std::vector<double> band_rms;

  // two-mode-mixture: points are stored as 2x1x1 images, labels give the mode.
  std::array<std::array<double, 2>, 2> centers{{{-0.5, -0.5}, {0.5, 0.5}}};
  double mode_std = 0.1;

  void validate() const;
};

/// Per-level RMS targets used when a texture spec leaves them empty.
std::vector<double> default_band_rms(std::size_t levels);

/// Deterministic in the spec.
Dataset synthesize(const SyntheticSpec& spec);

/// RMS of each pyramid coefficient level, pooled over the dataset.
std::vector<double> band_rms(const Dataset& ds, const SizeSchedule& schedule);

}  // namespace lapgan
