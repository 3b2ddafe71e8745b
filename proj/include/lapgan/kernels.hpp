#pragma once

// Data-parallel inner loops. `serial` is the reference implementation kept for
// testing; `omp` is what the layers call. Both produce the same values up to
// floating-point summation order. Every reduction in `omp` runs in a fixed
// order per output element, so results do not depend on the thread count.

#include <cstddef>
#include <span>

namespace lapgan::kernels {

struct DenseGeometry {
  std::size_t batch = 0;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_height = 0;
  std::size_t in_width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (in_height + 2 * padding - kernel) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * padding - kernel) / stride + 1; }
};

#define LAPGAN_DECLARE_KERNELS                                                                    \
  /* y[n,o] = b[o] + sum_i w[o,i] x[n,i] */                                                       \
  template <class T>                                                                              \
  void dense_forward(const DenseGeometry& g, std::span<const T> x, std::span<const T> w,          \
                     std::span<const T> b, std::span<T> y);                                       \
  template <class T>                                                                              \
  void dense_backward_input(const DenseGeometry& g, std::span<const T> dy, std::span<const T> w,  \
                            std::span<T> dx);                                                     \
  template <class T>                                                                              \
  void dense_backward_params(const DenseGeometry& g, std::span<const T> dy, std::span<const T> x, \
                             std::span<T> dw, std::span<T> db);                                   \
  /* Zero-padded cross-correlation, NCHW layout, weights [out, in, k, k]. */                      \
  template <class T>                                                                              \
  void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,          \
                      std::span<const T> b, std::span<T> y);                                      \
  template <class T>                                                                              \
  void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,  \
                             std::span<T> dx);                                                    \
  template <class T>                                                                              \
  void conv2d_backward_params(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x, \
                              std::span<T> dw, std::span<T> db);                                  \
  /* out[q * count + s] = |queries[q] - samples[s]|^2 over rows of length dim. */                 \
  void squared_distances(std::span<const double> samples, std::span<const double> queries,       \
                         std::size_t dim, std::span<double> out);

namespace serial {
LAPGAN_DECLARE_KERNELS
}

namespace omp {
LAPGAN_DECLARE_KERNELS
}

#undef LAPGAN_DECLARE_KERNELS

}  // namespace lapgan::kernels
