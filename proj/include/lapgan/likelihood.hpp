#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "lapgan/cascade.hpp"
#include "lapgan/dataset.hpp"
#include "lapgan/pyramid.hpp"
#include "lapgan/random.hpp"

namespace lapgan {

/// Gaussian kernel density over flattened samples (row-major, `dim` per row).
class ParzenModel {
 public:
  ParzenModel(std::vector<double> samples, std::size_t dim, double sigma);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return samples_.size() / dim_; }
  double sigma() const noexcept { return sigma_; }
  std::span<const double> samples() const noexcept { return samples_; }

 private:
  std::vector<double> samples_;
  std::size_t dim_;
  double sigma_;
};

/// log[(1/N) sum_i N(query; sample_i, sigma^2 I)] via log-sum-exp.
double parzen_logpdf(const ParzenModel& model, std::span<const double> query);
std::vector<double> parzen_logpdf(const ParzenModel& model, std::span<const double> queries, std::size_t count);

/// The same density from precomputed squared distances to every sample.
double parzen_from_distances(std::span<const double> squared_distances, std::size_t dim, double sigma);

/// `count` log-spaced bandwidths on [lo, hi].
std::vector<double> log_spaced(double lo, double hi, std::size_t count);
std::vector<double> default_sigma_grid();

/// Grid value maximizing the mean validation log-density; ties go to the smaller sigma.
double select_sigma(std::span<const double> samples, std::span<const double> validation, std::size_t dim,
                    std::span<const double> grid);

/// Index of the best column of `scores[row][grid]` by mean over rows, smaller index on ties.
std::size_t best_grid_index(const std::vector<std::vector<double>>& scores);

/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
std::pair<double, double> mean_std(std::span<const double> values);

/// Source of model samples for the multiscale estimator.
class LevelSampler {
 public:
  virtual ~LevelSampler() = default;
  virtual const SizeSchedule& schedule() const = 0;
  /// Draws of the coarsest image I_K.
  virtual std::vector<Image> sample_coarsest(std::size_t n, Rng& rng) const = 0;
  /// Draws of I_k = u(coarse) + h~_k given a coarse image at level k + 1.
  virtual std::vector<Image> sample_level(std::size_t k, const Image& coarse, std::size_t n, Rng& rng) const = 0;
};

class CascadeSampler : public LevelSampler {
 public:
  /// Throws InvalidState unless every level is present and trained.
  explicit CascadeSampler(const CascadeModel& cascade);
  const SizeSchedule& schedule() const override { return cascade_.schedule; }
  std::vector<Image> sample_coarsest(std::size_t n, Rng& rng) const override;
  std::vector<Image> sample_level(std::size_t k, const Image& coarse, std::size_t n, Rng& rng) const override;

 private:
  const CascadeModel& cascade_;
};

/// Full-resolution samples of a whole cascade (or a single-level GAN).
std::vector<Image> sample_images(const CascadeModel& cascade, std::size_t n, Rng& rng);

/// Per-level terms for one image: terms[k] is the conditional high-pass
/// term for k < K and terms[K] the coarsest low-pass term.
struct MultiscaleEstimate {
  std::vector<double> terms;
  double total = 0;
};

struct LikelihoodConfig {
  std::size_t n_model_samples = 10000;
  std::vector<double> sigma_grid = default_sigma_grid();
  std::uint64_t seed = 0;
};

/// Multiscale estimate of one image with fixed per-level bandwidths.
///
/// The image is split by the orthonormal 2x2 block transform into the true
/// block-mean image and the high-pass coefficients at every scale. The
/// coarsest term scores the true block mean against model draws of I_K;
/// every finer term conditions the model on the true low pass and scores the
/// true high-pass coefficients against the high-pass part of the draws.
/// Densities are evaluated in pixel units and converted to the orthonormal
/// coordinates, so the total is a proper log-density of the image.
MultiscaleEstimate multiscale_ll(const LevelSampler& sampler, const Image& image, std::size_t n_model_samples,
                                 std::span<const double> sigmas, Rng& rng);

struct MultiscaleReport {
  std::vector<double> sigmas;      // per level, selected on validation
  std::vector<double> level_means; // mean of each term over the test set
  std::vector<MultiscaleEstimate> per_image;
  double mean = 0;
  double std = 0;
  std::size_t n_model_samples = 0;
};

MultiscaleReport evaluate_multiscale(const LevelSampler& sampler, const Dataset& validation, const Dataset& test,
                                     const LikelihoodConfig& config);

struct FlatReport {
  double sigma = 0;
  std::vector<double> per_image;
  double mean = 0;
  double std = 0;
  std::size_t n_model_samples = 0;
};

/// Single-scale estimate: Parzen over full-resolution model samples.
FlatReport evaluate_flat(std::span<const Image> model_samples, const Dataset& validation, const Dataset& test,
                         std::span<const double> sigma_grid);

}  // namespace lapgan
