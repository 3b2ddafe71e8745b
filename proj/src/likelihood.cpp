#include "lapgan/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lapgan/errors.hpp"
#include "lapgan/kernels.hpp"

namespace lapgan {

ParzenModel::ParzenModel(std::vector<double> samples, std::size_t dim, double sigma)
    : samples_(std::move(samples)), dim_(dim), sigma_(sigma) {
  if (dim_ == 0) throw InvalidArgument("Parzen dimension must be positive");
  if (samples_.empty() || samples_.size() % dim_ != 0)
    throw InvalidArgument("Parzen samples must be a non-empty multiple of the dimension");
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_)) throw InvalidArgument("Parzen sigma must be positive");
}

double parzen_from_distances(std::span<const double> d2, std::size_t dim, double sigma) {
  if (d2.empty()) throw InvalidArgument("Parzen estimate needs at least one sample");
  if (!(sigma > 0.0)) throw InvalidArgument("Parzen sigma must be positive");
  const double inv = 1.0 / (2.0 * sigma * sigma);
  const double m = *std::ranges::min_element(d2);
  double acc = 0;
  for (double d : d2) acc += std::exp(-(d - m) * inv);
  const double v = -m * inv + std::log(acc) - std::log(static_cast<double>(d2.size())) -
                   0.5 * static_cast<double>(dim) * std::log(2.0 * std::numbers::pi * sigma * sigma);
  return std::isnan(v) ? v : std::max(v, std::numeric_limits<double>::lowest());
}

std::vector<double> parzen_logpdf(const ParzenModel& model, std::span<const double> queries, std::size_t count) {
  if (queries.size() != count * model.dim())
    throw InvalidArgument("query dimension does not match the Parzen model");
  std::vector<double> d2(count * model.count());
  kernels::omp::squared_distances(model.samples(), queries, model.dim(), d2);
  std::vector<double> out(count);
  for (std::size_t q = 0; q < count; ++q)
    out[q] = parzen_from_distances(std::span(d2).subspan(q * model.count(), model.count()), model.dim(),
                                   model.sigma());
  return out;
}

double parzen_logpdf(const ParzenModel& model, std::span<const double> query) {
  if (query.size() != model.dim()) throw InvalidArgument("query dimension does not match the Parzen model");
  return parzen_logpdf(model, query, 1)[0];
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw InvalidArgument("bad log-spaced range");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    out[i] = lo * std::pow(hi / lo, t);
  }
  out.back() = hi;
  return out;
}

std::vector<double> default_sigma_grid() { return log_spaced(0.01, 1.0, 20); }

std::size_t best_grid_index(const std::vector<std::vector<double>>& scores) {
  if (scores.empty()) throw InvalidArgument("no validation scores");
  const std::size_t g = scores.front().size();
  std::size_t best = 0;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < g; ++j) {
    double s = 0;
    for (const auto& row : scores) s += row[j];
    const double mean = s / static_cast<double>(scores.size());
    if (mean > best_mean) {
      best_mean = mean;
      best = j;
    }
  }
  return best;
}

namespace {

void check_grid(std::span<const double> grid) {
  if (grid.empty()) throw InvalidArgument("sigma grid is empty");
  for (double s : grid)
    if (!(s > 0.0)) throw InvalidArgument("sigma grid values must be positive");
}

// Sorted copy so that ties resolve to the smaller bandwidth.
std::vector<double> sorted_grid(std::span<const double> grid) {
  check_grid(grid);
  std::vector<double> g(grid.begin(), grid.end());
  std::ranges::sort(g);
  return g;
}

std::vector<std::vector<double>> grid_scores(std::span<const double> d2, std::size_t n_samples, std::size_t n_queries,
                                             std::size_t dim, std::span<const double> grid) {
  std::vector<std::vector<double>> scores(n_queries, std::vector<double>(grid.size()));
  for (std::size_t q = 0; q < n_queries; ++q)
    for (std::size_t j = 0; j < grid.size(); ++j)
      scores[q][j] = parzen_from_distances(d2.subspan(q * n_samples, n_samples), dim, grid[j]);
  return scores;
}

}  // namespace

double select_sigma(std::span<const double> samples, std::span<const double> validation, std::size_t dim,
                    std::span<const double> grid) {
  const auto g = sorted_grid(grid);
  if (validation.empty()) throw InvalidArgument("validation set is empty");
  if (dim == 0 || samples.empty() || samples.size() % dim || validation.size() % dim)
    throw InvalidArgument("sample and validation sizes must be multiples of the dimension");
  const std::size_t n = samples.size() / dim, q = validation.size() / dim;
  std::vector<double> d2(n * q);
  kernels::omp::squared_distances(samples, validation, dim, d2);
  return g[best_grid_index(grid_scores(d2, n, q, dim, g))];
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean_std of an empty set");
  double mean = 0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

CascadeSampler::CascadeSampler(const CascadeModel& cascade) : cascade_(cascade) {
  if (!cascade.trained()) throw InvalidState("likelihood evaluation needs a fully trained cascade");
}

std::vector<Image> CascadeSampler::sample_coarsest(std::size_t n, Rng& rng) const {
  const std::size_t K = cascade_.schedule.band_levels();
  std::vector<int> labels;
  if (cascade_.class_conditional())
    for (std::size_t i = 0; i < n; ++i)
      labels.push_back(static_cast<int>(uniform01(rng) * static_cast<double>(cascade_.classes)));
  const Tensor h = generate_level(cascade_.level(K), {}, labels, n, rng);
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(unstack(h, i));
  return out;
}

std::vector<Image> CascadeSampler::sample_level(std::size_t k, const Image& coarse, std::size_t n, Rng& rng) const {
  const Extent e = cascade_.schedule.levels.at(k);
  const Image l = upsample(coarse, e);
  std::vector<int> labels;
  if (cascade_.class_conditional())
    for (std::size_t i = 0; i < n; ++i)
      labels.push_back(static_cast<int>(uniform01(rng) * static_cast<double>(cascade_.classes)));
  const std::vector<Image> conds(n, l);
  const Tensor h = generate_level(cascade_.level(k), stack(std::span<const Image>(conds)), labels, n, rng);
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(l + unstack(h, i));
  return out;
}

std::vector<Image> sample_images(const CascadeModel& cascade, std::size_t n, Rng& rng) {
  // Batched coarse-to-fine pass; same recurrence as sample().
  const CascadeSampler sampler(cascade);
  std::vector<Image> cur = sampler.sample_coarsest(n, rng);
  for (std::size_t k = cascade.schedule.band_levels(); k-- > 0;) {
    const Extent e = cascade.schedule.levels[k];
    std::vector<Image> conds;
    for (const auto& c : cur) conds.push_back(upsample(c, e));
    std::vector<int> labels;
    if (cascade.class_conditional())
      for (std::size_t i = 0; i < n; ++i)
        labels.push_back(static_cast<int>(uniform01(rng) * static_cast<double>(cascade.classes)));
    const Tensor h = generate_level(cascade.level(k), stack(std::span<const Image>(conds)), labels, n, rng);
    for (std::size_t i = 0; i < n; ++i) cur[i] = conds[i] + unstack(h, i);
  }
  return cur;
}

namespace {

std::vector<double> flatten(std::span<const Image> imgs) {
  std::vector<double> out;
  for (const auto& img : imgs) out.insert(out.end(), img.values().begin(), img.values().end());
  return out;
}

// True block-mean chain M_0 .. M_K and the high-pass coefficients of each M_k.
struct BlockChain {
  std::vector<ImageD> means;
  std::vector<std::vector<double>> highs;
};

BlockChain block_chain(const Image& image, std::size_t levels) {
  BlockChain c;
  c.means.push_back(image.cast<double>());
  for (std::size_t k = 0; k + 1 < levels; ++k) {
    auto bf = block_forward(c.means.back());
    c.highs.emplace_back(bf.high.values().begin(), bf.high.values().end());
    bf.low *= 0.5;
    c.means.push_back(std::move(bf.low));
  }
  return c;
}

std::vector<double> high_part(const Image& img) {
  const auto bf = block_forward(img.cast<double>());
  return {bf.high.values().begin(), bf.high.values().end()};
}

void check_dyadic(const SizeSchedule& s) {
  if (!s.is_dyadic()) throw InvalidArgument("the multiscale estimator needs a schedule that halves at every level");
}

// Squared distances from the image's per-level query to fresh model draws.
struct LevelDistances {
  std::vector<std::vector<double>> d2;  // per level
  std::vector<std::size_t> dims;
};

LevelDistances level_distances(const LevelSampler& sampler, const Image& image, std::span<const double> coarse_samples,
                               std::size_t n, Rng& rng) {
  const SizeSchedule& s = sampler.schedule();
  const std::size_t K = s.band_levels();
  if (image.extent() != s.finest()) throw InvalidArgument("image size does not match the cascade");
  const BlockChain chain = block_chain(image, K + 1);

  LevelDistances out;
  out.d2.resize(K + 1);
  out.dims.resize(K + 1);
  for (std::size_t k = 0; k < K; ++k) {
    const auto draws = sampler.sample_level(k, chain.means[k + 1].cast<float>(), n, rng);
    std::vector<double> samples;
    for (const auto& d : draws) {
      const auto h = high_part(d);
      samples.insert(samples.end(), h.begin(), h.end());
    }
    out.dims[k] = chain.highs[k].size();
    out.d2[k].resize(n);
    kernels::omp::squared_distances(samples, chain.highs[k], out.dims[k], out.d2[k]);
  }
  const std::vector<double> top(chain.means[K].values().begin(), chain.means[K].values().end());
  out.dims[K] = top.size();
  out.d2[K].resize(coarse_samples.size() / top.size());
  kernels::omp::squared_distances(coarse_samples, top, top.size(), out.d2[K]);
  return out;
}

// Conversion from pixel-unit density to the orthonormal chain coordinates,
// which carry a factor 2^k at depth k.
double jacobian(std::size_t dim, std::size_t k) {
  return -static_cast<double>(dim) * static_cast<double>(k) * std::numbers::ln2;
}

MultiscaleEstimate assemble(const LevelDistances& ld, std::span<const double> sigmas) {
  MultiscaleEstimate e;
  for (std::size_t k = 0; k < ld.d2.size(); ++k) {
    e.terms.push_back(parzen_from_distances(ld.d2[k], ld.dims[k], sigmas[k]) + jacobian(ld.dims[k], k));
    e.total += e.terms.back();
  }
  return e;
}

std::vector<double> coarse_pool(const LevelSampler& sampler, std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0xc0a25e));
  return flatten(sampler.sample_coarsest(n, rng));
}

}  // namespace

MultiscaleEstimate multiscale_ll(const LevelSampler& sampler, const Image& image, std::size_t n_model_samples,
                                 std::span<const double> sigmas, Rng& rng) {
  check_dyadic(sampler.schedule());
  if (n_model_samples == 0) throw InvalidArgument("n_model_samples must be positive");
  if (sigmas.size() != sampler.schedule().levels.size()) throw InvalidArgument("need one sigma per level");
  const auto coarse = flatten(sampler.sample_coarsest(n_model_samples, rng));
  return assemble(level_distances(sampler, image, coarse, n_model_samples, rng), sigmas);
}

MultiscaleReport evaluate_multiscale(const LevelSampler& sampler, const Dataset& validation, const Dataset& test,
                                     const LikelihoodConfig& config) {
  check_dyadic(sampler.schedule());
  const auto grid = sorted_grid(config.sigma_grid);
  if (validation.empty()) throw InvalidArgument("validation set is empty");
  if (test.empty()) throw InvalidArgument("test set is empty");
  if (config.n_model_samples == 0) throw InvalidArgument("n_model_samples must be positive");
  const std::size_t n = config.n_model_samples;
  const std::size_t levels = sampler.schedule().levels.size();
  const auto coarse = coarse_pool(sampler, n, config.seed);

  auto distances = [&](const Dataset& ds, std::uint64_t tag) {
    std::vector<LevelDistances> out;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      Rng rng(derive_seed(derive_seed(config.seed, tag), i));
      out.push_back(level_distances(sampler, ds.images[i], coarse, n, rng));
    }
    return out;
  };

  MultiscaleReport r;
  r.n_model_samples = n;
  const auto val = distances(validation, 1);
  for (std::size_t k = 0; k < levels; ++k) {
    std::vector<std::vector<double>> scores;
    for (const auto& ld : val) {
      scores.emplace_back();
      for (double s : grid) scores.back().push_back(parzen_from_distances(ld.d2[k], ld.dims[k], s));
    }
    r.sigmas.push_back(grid[best_grid_index(scores)]);
  }

  std::vector<double> totals;
  r.level_means.assign(levels, 0.0);
  for (const auto& ld : distances(test, 2)) {
    r.per_image.push_back(assemble(ld, r.sigmas));
    totals.push_back(r.per_image.back().total);
    for (std::size_t k = 0; k < levels; ++k) r.level_means[k] += r.per_image.back().terms[k];
  }
  for (auto& m : r.level_means) m /= static_cast<double>(test.size());
  std::tie(r.mean, r.std) = mean_std(totals);
  return r;
}

FlatReport evaluate_flat(std::span<const Image> model_samples, const Dataset& validation, const Dataset& test,
                         std::span<const double> sigma_grid) {
  const auto grid = sorted_grid(sigma_grid);
  if (model_samples.empty()) throw InvalidArgument("no model samples");
  if (validation.empty() || test.empty()) throw InvalidArgument("validation and test sets must be non-empty");
  const std::size_t dim = model_samples.front().size();
  const auto samples = flatten(model_samples);
  const std::size_t n = model_samples.size();

  auto d2_of = [&](const Dataset& ds) {
    const auto q = flatten(std::span<const Image>(ds.images));
    if (q.size() != ds.size() * dim) throw InvalidArgument("test image size does not match model samples");
    std::vector<double> d2(ds.size() * n);
    kernels::omp::squared_distances(samples, q, dim, d2);
    return d2;
  };

  FlatReport r;
  r.n_model_samples = n;
  r.sigma = grid[best_grid_index(grid_scores(d2_of(validation), n, validation.size(), dim, grid))];
  const auto d2 = d2_of(test);
  for (std::size_t q = 0; q < test.size(); ++q)
    r.per_image.push_back(parzen_from_distances(std::span(d2).subspan(q * n, n), dim, r.sigma));
  std::tie(r.mean, r.std) = mean_std(r.per_image);
  return r;
}

}  // namespace lapgan
