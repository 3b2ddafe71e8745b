#include "lapgan/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "lapgan/errors.hpp"
#include "lapgan/random.hpp"

namespace lapgan {

std::string_view to_string(SyntheticKind kind) {
  switch (kind) {
    case SyntheticKind::multiscale_texture:
      return "multiscale-texture";
    case SyntheticKind::gaussian_blobs:
      return "gaussian-blobs";
    case SyntheticKind::two_mode_mixture:
      return "two-mode-mixture";
  }
  return "?";
}

SyntheticKind parse_synthetic_kind(std::string_view name) {
  for (auto k : {SyntheticKind::multiscale_texture, SyntheticKind::gaussian_blobs, SyntheticKind::two_mode_mixture})
    if (to_string(k) == name) return k;
  throw InvalidArgument("unknown synthetic kind '" + std::string(name) + "'");
}

void SyntheticSpec::validate() const {
  if (count == 0) throw InvalidArgument("synthetic count must be at least 1");
  if (kind == SyntheticKind::two_mode_mixture) {
    if (!(mode_std >= 0.0)) throw InvalidArgument("mode_std must be non-negative");
    return;
  }
  if (size.height == 0 || size.width == 0 || channels == 0) throw InvalidArgument("synthetic size must be positive");
  if (kind == SyntheticKind::multiscale_texture && !band_rms.empty()) {
    const auto levels = SizeSchedule::automatic(size).levels.size();
    if (band_rms.size() != levels)
      throw InvalidArgument("band_rms needs " + std::to_string(levels) + " entries for " + lapgan::to_string(size));
    for (double r : band_rms)
      if (!(r >= 0.0)) throw InvalidArgument("band_rms entries must be non-negative");
  }
}

std::vector<double> default_band_rms(std::size_t levels) {
  // Coarse bands carry most of the energy, as in natural images.
  std::vector<double> out(levels);
  for (std::size_t k = 0; k < levels; ++k) out[k] = 0.3 * std::pow(0.6, static_cast<double>(levels - 1 - k));
  return out;
}

std::vector<double> band_rms(const Dataset& ds, const SizeSchedule& schedule) {
  std::vector<double> energy(schedule.levels.size(), 0.0);
  std::vector<double> count(schedule.levels.size(), 0.0);
  for (const auto& img : ds.images) {
    const auto pyr = build_pyramid(img, schedule);
    for (std::size_t k = 0; k < pyr.coeffs.size(); ++k) {
      energy[k] += pyr.coeffs[k].squared_norm();
      count[k] += static_cast<double>(pyr.coeffs[k].size());
    }
  }
  for (std::size_t k = 0; k < energy.size(); ++k) energy[k] = std::sqrt(energy[k] / std::max(count[k], 1.0));
  return energy;
}

namespace {

// Component j: white noise at level j, carried up to the finest size.
ImageD lifted_noise(const SizeSchedule& schedule, std::size_t j, std::size_t channels, Rng& rng) {
  const Extent e = schedule.levels[j];
  ImageD img(channels, e.height, e.width);
  for (auto& v : img.values()) v = standard_normal(rng);
  for (std::size_t k = j; k-- > 0;) img = upsample(img, schedule.levels[k]);
  return img;
}

// Mean squared coefficient of each pyramid level produced by a unit-variance
// component at each level: m[k][j]. Components are independent, so level
// energies add up linearly in the squared amplitudes.
std::vector<std::vector<double>> energy_matrix(const SizeSchedule& schedule, std::size_t channels) {
  const std::size_t n = schedule.levels.size();
  constexpr int kTrials = 64;
  std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
  Rng rng(0x7e57);
  for (std::size_t j = 0; j < n; ++j) {
    for (int t = 0; t < kTrials; ++t) {
      const auto pyr = build_pyramid(lifted_noise(schedule, j, channels, rng), schedule);
      for (std::size_t k = 0; k < n; ++k)
        m[k][j] += pyr.coeffs[k].squared_norm() / static_cast<double>(pyr.coeffs[k].size() * kTrials);
    }
  }
  return m;
}

// Solves m a = b for a >= 0 by projected Gauss-Seidel. The matrix is
// diagonally dominant in practice, so this converges quickly.
std::vector<double> nonnegative_solve(const std::vector<std::vector<double>>& m, const std::vector<double>& b) {
  const std::size_t n = b.size();
  std::vector<double> a(n, 0.0);
  for (int sweep = 0; sweep < 500; ++sweep) {
    for (std::size_t i = 0; i < n; ++i) {
      double r = b[i];
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) r -= m[i][j] * a[j];
      a[i] = std::max(0.0, r / m[i][i]);
    }
  }
  return a;
}

Dataset texture(const SyntheticSpec& spec, Rng& rng) {
  const SizeSchedule schedule = SizeSchedule::automatic(spec.size);
  const std::size_t n = schedule.levels.size();
  const auto targets = spec.band_rms.empty() ? default_band_rms(n) : spec.band_rms;
  std::vector<double> target_energy(n);
  for (std::size_t k = 0; k < n; ++k) target_energy[k] = targets[k] * targets[k];
  const auto power = nonnegative_solve(energy_matrix(schedule, spec.channels), target_energy);

  Dataset ds;
  for (std::size_t i = 0; i < spec.count; ++i) {
    ImageD img(spec.channels, spec.size.height, spec.size.width);
    for (std::size_t j = 0; j < n; ++j) {
      ImageD part = lifted_noise(schedule, j, spec.channels, rng);
      part *= std::sqrt(power[j]);
      img += part;
    }
    for (auto& v : img.values()) v = std::clamp(v, -1.0, 1.0);
    ds.images.push_back(img.cast<float>());
  }
  return ds;
}

Dataset blobs(const SyntheticSpec& spec, Rng& rng) {
  Dataset ds;
  const double h = static_cast<double>(spec.size.height);
  const double w = static_cast<double>(spec.size.width);
  for (std::size_t i = 0; i < spec.count; ++i) {
    Image img(spec.channels, spec.size.height, spec.size.width, -1.0f);
    const int count = 1 + static_cast<int>(uniform01(rng) * 3);
    for (int b = 0; b < count; ++b) {
      const double cy = uniform01(rng) * h, cx = uniform01(rng) * w;
      const double radius = (0.08 + 0.17 * uniform01(rng)) * std::min(h, w);
      std::vector<double> amp(spec.channels);
      for (auto& a : amp) a = 0.5 + 1.5 * uniform01(rng);
      for (std::size_t c = 0; c < spec.channels; ++c)
        for (std::size_t y = 0; y < spec.size.height; ++y)
          for (std::size_t x = 0; x < spec.size.width; ++x) {
            const double dy = static_cast<double>(y) + 0.5 - cy, dx = static_cast<double>(x) + 0.5 - cx;
            img.at(c, y, x) += static_cast<float>(amp[c] * std::exp(-(dy * dy + dx * dx) / (2 * radius * radius)));
          }
    }
    for (auto& v : img.values()) v = std::clamp(v, -1.0f, 1.0f);
    ds.images.push_back(std::move(img));
  }
  return ds;
}

Dataset mixture(const SyntheticSpec& spec, Rng& rng) {
  Dataset ds;
  ds.classes = 2;
  for (std::size_t i = 0; i < spec.count; ++i) {
    const int mode = uniform01(rng) < 0.5 ? 0 : 1;
    Image img(2, 1, 1);
    for (std::size_t d = 0; d < 2; ++d)
      img.values()[d] = static_cast<float>(spec.centers[mode][d] + spec.mode_std * standard_normal(rng));
    ds.images.push_back(std::move(img));
    ds.labels.push_back(mode);
  }
  return ds;
}

}  // namespace

Dataset synthesize(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  switch (spec.kind) {
    case SyntheticKind::multiscale_texture:
      return texture(spec, rng);
    case SyntheticKind::gaussian_blobs:
      return blobs(spec, rng);
    case SyntheticKind::two_mode_mixture:
      return mixture(spec, rng);
  }
  throw InvalidArgument("unknown synthetic kind");
}

}  // namespace lapgan
