#include "lapgan/kernels.hpp"

namespace lapgan::kernels::serial {

template <class T>
void dense_forward(const DenseGeometry& g, std::span<const T> x, std::span<const T> w,
                   std::span<const T> b, std::span<T> y) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t o = 0; o < g.out_features; ++o) {
      T acc = b[o];
      for (std::size_t i = 0; i < g.in_features; ++i) acc += w[o * g.in_features + i] * x[n * g.in_features + i];
      y[n * g.out_features + o] = acc;
    }
  }
}

template <class T>
void dense_backward_input(const DenseGeometry& g, std::span<const T> dy, std::span<const T> w,
                          std::span<T> dx) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t i = 0; i < g.in_features; ++i) {
      T acc = 0;
      for (std::size_t o = 0; o < g.out_features; ++o) acc += dy[n * g.out_features + o] * w[o * g.in_features + i];
      dx[n * g.in_features + i] = acc;
    }
  }
}

template <class T>
void dense_backward_params(const DenseGeometry& g, std::span<const T> dy, std::span<const T> x,
                           std::span<T> dw, std::span<T> db) {
  for (std::size_t o = 0; o < g.out_features; ++o) {
    T bias = 0;
    for (std::size_t n = 0; n < g.batch; ++n) bias += dy[n * g.out_features + o];
    db[o] = bias;
    for (std::size_t i = 0; i < g.in_features; ++i) {
      T acc = 0;
      for (std::size_t n = 0; n < g.batch; ++n) acc += dy[n * g.out_features + o] * x[n * g.in_features + i];
      dw[o * g.in_features + i] = acc;
    }
  }
}

namespace {

// Input coordinate feeding output position `o` through kernel tap `k`, or -1.
long tap(std::size_t o, std::size_t k, const ConvGeometry& g, std::size_t extent) {
  const long pos = static_cast<long>(o * g.stride + k) - static_cast<long>(g.padding);
  return pos >= 0 && pos < static_cast<long>(extent) ? pos : -1;
}

}  // namespace

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T acc = b[oc];
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long iy = tap(oy, ky, g, g.in_height);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long ix = tap(ox, kx, g, g.in_width);
                if (ix < 0) continue;
                acc += w[((oc * g.in_channels + ic) * k + ky) * k + kx] *
                       x[((n * g.in_channels + ic) * g.in_height + iy) * g.in_width + ix];
              }
            }
          y[((n * g.out_channels + oc) * oh + oy) * ow + ox] = acc;
        }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                           std::span<T> dx) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (auto& v : dx) v = 0;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T grad = dy[((n * g.out_channels + oc) * oh + oy) * ow + ox];
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long iy = tap(oy, ky, g, g.in_height);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long ix = tap(ox, kx, g, g.in_width);
                if (ix < 0) continue;
                dx[((n * g.in_channels + ic) * g.in_height + iy) * g.in_width + ix] +=
                    grad * w[((oc * g.in_channels + ic) * k + ky) * k + kx];
              }
            }
        }
}

template <class T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x,
                            std::span<T> dw, std::span<T> db) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  for (auto& v : dw) v = 0;
  for (auto& v : db) v = 0;
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t oc = 0; oc < g.out_channels; ++oc)
      for (std::size_t oy = 0; oy < oh; ++oy)
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const T grad = dy[((n * g.out_channels + oc) * oh + oy) * ow + ox];
          db[oc] += grad;
          for (std::size_t ic = 0; ic < g.in_channels; ++ic)
            for (std::size_t ky = 0; ky < k; ++ky) {
              const long iy = tap(oy, ky, g, g.in_height);
              if (iy < 0) continue;
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long ix = tap(ox, kx, g, g.in_width);
                if (ix < 0) continue;
                dw[((oc * g.in_channels + ic) * k + ky) * k + kx] +=
                    grad * x[((n * g.in_channels + ic) * g.in_height + iy) * g.in_width + ix];
              }
            }
        }
}

void squared_distances(std::span<const double> samples, std::span<const double> queries, std::size_t dim,
                       std::span<double> out) {
  const std::size_t count = samples.size() / dim;
  const std::size_t nq = queries.size() / dim;
  for (std::size_t q = 0; q < nq; ++q)
    for (std::size_t s = 0; s < count; ++s) {
      double acc = 0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double d = queries[q * dim + i] - samples[s * dim + i];
        acc += d * d;
      }
      out[q * count + s] = acc;
    }
}

#define LAPGAN_INSTANTIATE(T)                                                                           \
  template void dense_forward<T>(const DenseGeometry&, std::span<const T>, std::span<const T>,          \
                                 std::span<const T>, std::span<T>);                                     \
  template void dense_backward_input<T>(const DenseGeometry&, std::span<const T>, std::span<const T>,   \
                                        std::span<T>);                                                  \
  template void dense_backward_params<T>(const DenseGeometry&, std::span<const T>, std::span<const T>,  \
                                         std::span<T>, std::span<T>);                                   \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,          \
                                  std::span<const T>, std::span<T>);                                    \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,   \
                                         std::span<T>);                                                 \
  template void conv2d_backward_params<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,  \
                                          std::span<T>, std::span<T>);

LAPGAN_INSTANTIATE(float)
LAPGAN_INSTANTIATE(double)

}  // namespace lapgan::kernels::serial
