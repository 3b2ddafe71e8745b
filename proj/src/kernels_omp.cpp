#include <algorithm>
#include <cstddef>

#include "lapgan/kernels.hpp"

namespace lapgan::kernels::omp {

using Index = std::ptrdiff_t;

template <class T>
void dense_forward(const DenseGeometry& g, std::span<const T> x, std::span<const T> w,
                   std::span<const T> b, std::span<T> y) {
  const Index batch = static_cast<Index>(g.batch);
  const std::size_t in = g.in_features, out = g.out_features;
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < batch; ++n) {
    const T* xr = x.data() + n * in;
    T* yr = y.data() + n * out;
    for (std::size_t o = 0; o < out; ++o) {
      const T* wr = w.data() + o * in;
      T acc = 0;
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc + b[o];
    }
  }
}

template <class T>
void dense_backward_input(const DenseGeometry& g, std::span<const T> dy, std::span<const T> w,
                          std::span<T> dx) {
  const Index batch = static_cast<Index>(g.batch);
  const std::size_t in = g.in_features, out = g.out_features;
#pragma omp parallel for schedule(static)
  for (Index n = 0; n < batch; ++n) {
    T* dxr = dx.data() + n * in;
    std::fill(dxr, dxr + in, T{0});
    for (std::size_t o = 0; o < out; ++o) {
      const T grad = dy[n * out + o];
      if (grad == T{0}) continue;
      const T* wr = w.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dxr[i] += grad * wr[i];
    }
  }
}

template <class T>
void dense_backward_params(const DenseGeometry& g, std::span<const T> dy, std::span<const T> x,
                           std::span<T> dw, std::span<T> db) {
  const Index out = static_cast<Index>(g.out_features);
  const std::size_t in = g.in_features, batch = g.batch;
#pragma omp parallel for schedule(static)
  for (Index o = 0; o < out; ++o) {
    T* dwr = dw.data() + o * in;
    std::fill(dwr, dwr + in, T{0});
    T bias = 0;
    for (std::size_t n = 0; n < batch; ++n) {
      const T grad = dy[n * out + o];
      bias += grad;
      if (grad == T{0}) continue;
      const T* xr = x.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) dwr[i] += grad * xr[i];
    }
    db[o] = bias;
  }
}

namespace {

// Output positions [lo, hi) whose tap `k` lands inside [0, extent).
struct Range {
  std::size_t lo, hi;
};

Range valid_outputs(std::size_t k, std::size_t extent, std::size_t out_extent, const ConvGeometry& g) {
  const long pad = static_cast<long>(g.padding), s = static_cast<long>(g.stride), kk = static_cast<long>(k);
  long lo = 0;
  if (pad > kk) lo = (pad - kk + s - 1) / s;
  long hi = (static_cast<long>(extent) - 1 + pad - kk);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<long>(hi, static_cast<long>(out_extent));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

template <class T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  const std::size_t H = g.in_height, W = g.in_width, s = g.stride, p = g.padding;
  const Index planes = static_cast<Index>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index plane = 0; plane < planes; ++plane) {
    const std::size_t n = plane / g.out_channels, oc = plane % g.out_channels;
    T* out = y.data() + plane * oh * ow;
    std::fill(out, out + oh * ow, b[oc]);
    for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
      const T* in = x.data() + (n * g.in_channels + ic) * H * W;
      const T* wk = w.data() + (oc * g.in_channels + ic) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range rows = valid_outputs(ky, H, oh, g);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range cols = valid_outputs(kx, W, ow, g);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
            const T* src = in + (oy * s + ky - p) * W;
            T* dst = out + oy * ow;
            for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox] += wv * src[ox * s + kx - p];
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> dy, std::span<const T> w,
                           std::span<T> dx) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  const std::size_t H = g.in_height, W = g.in_width, s = g.stride, p = g.padding;
  const Index planes = static_cast<Index>(g.batch * g.in_channels);
#pragma omp parallel for schedule(static)
  for (Index plane = 0; plane < planes; ++plane) {
    const std::size_t n = plane / g.in_channels, ic = plane % g.in_channels;
    T* in = dx.data() + plane * H * W;
    std::fill(in, in + H * W, T{0});
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      const T* grad = dy.data() + (n * g.out_channels + oc) * oh * ow;
      const T* wk = w.data() + (oc * g.in_channels + ic) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range rows = valid_outputs(ky, H, oh, g);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range cols = valid_outputs(kx, W, ow, g);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
            T* dst = in + (oy * s + ky - p) * W;
            const T* src = grad + oy * ow;
            for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) dst[ox * s + kx - p] += wv * src[ox];
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> dy, std::span<const T> x,
                            std::span<T> dw, std::span<T> db) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  const std::size_t H = g.in_height, W = g.in_width, s = g.stride, p = g.padding;
  const Index pairs = static_cast<Index>(g.out_channels * g.in_channels);
#pragma omp parallel for schedule(static)
  for (Index pair = 0; pair < pairs; ++pair) {
    const std::size_t oc = pair / g.in_channels, ic = pair % g.in_channels;
    T* wk = dw.data() + pair * k * k;
    for (std::size_t ky = 0; ky < k; ++ky) {
      const Range rows = valid_outputs(ky, H, oh, g);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const Range cols = valid_outputs(kx, W, ow, g);
        T acc = 0;
        for (std::size_t n = 0; n < g.batch; ++n) {
          const T* grad = dy.data() + (n * g.out_channels + oc) * oh * ow;
          const T* in = x.data() + (n * g.in_channels + ic) * H * W;
          for (std::size_t oy = rows.lo; oy < rows.hi; ++oy) {
            const T* src = in + (oy * s + ky - p) * W;
            const T* gr = grad + oy * ow;
            for (std::size_t ox = cols.lo; ox < cols.hi; ++ox) acc += gr[ox] * src[ox * s + kx - p];
          }
        }
        wk[ky * k + kx] = acc;
      }
    }
  }
  const Index outs = static_cast<Index>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (Index oc = 0; oc < outs; ++oc) {
    T acc = 0;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* grad = dy.data() + (n * g.out_channels + oc) * oh * ow;
      for (std::size_t i = 0; i < oh * ow; ++i) acc += grad[i];
    }
    db[oc] = acc;
  }
}

void squared_distances(std::span<const double> samples, std::span<const double> queries, std::size_t dim,
                       std::span<double> out) {
  const std::size_t count = samples.size() / dim;
  const Index total = static_cast<Index>((queries.size() / dim) * count);
#pragma omp parallel for schedule(static)
  for (Index idx = 0; idx < total; ++idx) {
    const double* q = queries.data() + (idx / count) * dim;
    const double* s = samples.data() + (idx % count) * dim;
    double acc = 0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = q[i] - s[i];
      acc += d * d;
    }
    out[idx] = acc;
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

}  // namespace lapgan::kernels::omp
