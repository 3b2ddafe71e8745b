// Serial reference vs OpenMP kernels on the shapes the desk-scale models use.

#include <benchmark/benchmark.h>

#include <vector>

#include "lapgan/kernels.hpp"
#include "lapgan/random.hpp"

using namespace lapgan;
using namespace lapgan::kernels;

namespace {

std::vector<float> random_floats(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(uniform_pm1(rng));
  return v;
}

std::vector<double> random_doubles(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = uniform_pm1(rng);
  return v;
}

ConvGeometry level_conv() {
  return {.batch = 64, .in_channels = 8, .in_height = 16, .in_width = 16, .out_channels = 8,
          .kernel = 3, .stride = 1, .padding = 1};
}

template <bool Parallel>
void BM_DenseForward(benchmark::State& state) {
  const DenseGeometry g{128, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
  const auto x = random_floats(g.batch * g.in_features, 1), w = random_floats(g.out_features * g.in_features, 2),
             b = random_floats(g.out_features, 3);
  std::vector<float> y(g.batch * g.out_features);
  for (auto _ : state) {
    if constexpr (Parallel) {
      omp::dense_forward<float>(g, x, w, b, y);
    } else {
      serial::dense_forward<float>(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_DenseBackwardParams(benchmark::State& state) {
  const DenseGeometry g{128, static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(0))};
  const auto x = random_floats(g.batch * g.in_features, 1), dy = random_floats(g.batch * g.out_features, 2);
  std::vector<float> dw(g.out_features * g.in_features), db(g.out_features);
  for (auto _ : state) {
    if constexpr (Parallel) {
      omp::dense_backward_params<float>(g, dy, x, dw, db);
    } else {
      serial::dense_backward_params<float>(g, dy, x, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void BM_Conv2dForward(benchmark::State& state) {
  const ConvGeometry g = level_conv();
  const auto x = random_floats(g.batch * g.in_channels * g.in_height * g.in_width, 1);
  const auto w = random_floats(g.out_channels * g.in_channels * 9, 2), b = random_floats(g.out_channels, 3);
  std::vector<float> y(g.batch * g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) {
      omp::conv2d_forward<float>(g, x, w, b, y);
    } else {
      serial::conv2d_forward<float>(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Conv2dBackward(benchmark::State& state) {
  const ConvGeometry g = level_conv();
  const auto x = random_floats(g.batch * g.in_channels * g.in_height * g.in_width, 1);
  const auto w = random_floats(g.out_channels * g.in_channels * 9, 2);
  const auto dy = random_floats(g.batch * g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      omp::conv2d_backward_input<float>(g, dy, w, dx);
      omp::conv2d_backward_params<float>(g, dy, x, dw, db);
    } else {
      serial::conv2d_backward_input<float>(g, dy, w, dx);
      serial::conv2d_backward_params<float>(g, dy, x, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
}

template <bool Parallel>
void BM_SquaredDistances(benchmark::State& state) {
  const std::size_t dim = 256, count = static_cast<std::size_t>(state.range(0)), queries = 16;
  const auto samples = random_doubles(count * dim, 1), q = random_doubles(queries * dim, 2);
  std::vector<double> out(queries * count);
  for (auto _ : state) {
    if constexpr (Parallel) {
      omp::squared_distances(samples, q, dim, out);
    } else {
      serial::squared_distances(samples, q, dim, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_DenseForward<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_DenseForward<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_DenseBackwardParams<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_DenseBackwardParams<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_Conv2dForward<false>);
BENCHMARK(BM_Conv2dForward<true>);
BENCHMARK(BM_Conv2dBackward<false>);
BENCHMARK(BM_Conv2dBackward<true>);
BENCHMARK(BM_SquaredDistances<false>)->Arg(1000)->Arg(10000);
BENCHMARK(BM_SquaredDistances<true>)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
