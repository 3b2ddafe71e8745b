#pragma once

#include <array>
#include <vector>

#include "lapgan/image.hpp"
#include "lapgan/tensor.hpp"

namespace lapgan {

/// Level sizes from finest (index 0) to coarsest (index K).
struct SizeSchedule {
  std::vector<Extent> levels;

  /// Number of band-pass levels K; the schedule holds K + 1 sizes.
  std::size_t band_levels() const { return levels.empty() ? 0 : levels.size() - 1; }
  const Extent& finest() const { return levels.front(); }
  const Extent& coarsest() const { return levels.back(); }

  /// Every step halves both sides exactly.
  bool is_dyadic() const;

  /// Throws InvalidArgument unless sizes are positive and strictly decreasing.
  void validate() const;

  /// Halves (rounding down) until both sides are at most `max_coarsest`.
  static SizeSchedule automatic(Extent finest, std::size_t max_coarsest = 8);

  friend bool operator==(const SizeSchedule&, const SizeSchedule&) = default;
};

/// Laplacian coefficients [h_0 .. h_K]; h_K is the low-frequency residual.
template <class T>
struct BasicPyramid {
  std::vector<BasicImage<T>> coeffs;
  SizeSchedule schedule;
};

using Pyramid = BasicPyramid<float>;

/// Separable 5-tap binomial kernel [1 4 6 4 1] / 16.
inline constexpr std::array<double, 5> kBinomialKernel = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

/// Mirror index into [0, n) without repeating the edge sample.
std::size_t reflect_index(long i, std::size_t n);

/// Blurs and shrinks to `target`. Exact halving takes the classic
/// blur-and-decimate path; other sizes blur and then resample linearly.
template <class T>
BasicImage<T> downsample(const BasicImage<T>& img, Extent target);

/// Smooths and expands to `target`. Exact doubling inserts zeros, blurs and
/// applies a gain of 4; other sizes blur and then resample linearly.
template <class T>
BasicImage<T> upsample(const BasicImage<T>& img, Extent target);

/// [I_0 .. I_K] with I_{k+1} = downsample(I_k).
template <class T>
std::vector<BasicImage<T>> gaussian_pyramid(const BasicImage<T>& img, const SizeSchedule& schedule);

template <class T>
BasicPyramid<T> build_pyramid(const BasicImage<T>& img, const SizeSchedule& schedule);

template <class T>
BasicImage<T> reconstruct(const BasicPyramid<T>& pyramid);

// Orthonormal 2x2 block transform. Row 0 is the block mean direction, rows
// 1-3 span its complement (vertical, horizontal and diagonal differences).
// Blocks are flattened as [top-left, top-right, bottom-left, bottom-right].
inline constexpr std::array<std::array<double, 4>, 4> kBlockBasis = {{
    {0.5, 0.5, 0.5, 0.5},
    {0.5, 0.5, -0.5, -0.5},
    {0.5, -0.5, 0.5, -0.5},
    {0.5, -0.5, -0.5, 0.5},
}};

template <class T>
struct BlockCoefficients {
  BasicImage<T> low;    // {C, H/2, W/2}; twice the block mean
  BasicTensor<T> high;  // {C, 3, H/2, W/2}
};

template <class T>
BlockCoefficients<T> block_forward(const BasicImage<T>& img);

template <class T>
BasicImage<T> block_inverse(const BasicImage<T>& low, const BasicTensor<T>& high);

}  // namespace lapgan
