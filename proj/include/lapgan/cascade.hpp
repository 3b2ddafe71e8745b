#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lapgan/adversarial.hpp"
#include "lapgan/dataset.hpp"
#include "lapgan/errors.hpp"
#include "lapgan/nn.hpp"
#include "lapgan/optim.hpp"
#include "lapgan/pyramid.hpp"
#include "lapgan/serialization.hpp"

namespace lapgan {

enum class NoiseKind { vector, plane };

/// Layer widths for the default per-level architectures.
struct ArchitectureConfig {
  std::size_t noise_dim = 100;
  std::size_t final_g_hidden = 256;
  std::size_t final_d_hidden = 128;
  std::size_t conv_channels = 32;
  std::size_t d_dense_hidden = 32;
  double dropout = 0.5;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

/// Networks and plumbing for one pyramid level.
///
/// Final level (k = K): G maps a noise vector to h_K, D sees h_K.
/// Other levels: G sees a noise plane with l_k = u(I_{k+1}) concatenated
/// along channels; D sees h + l_k with l_k concatenated again. In
/// class-conditional mode both nets append one embedded class plane.
struct LevelSpec {
  std::size_t k = 0;
  Extent size;
  bool is_final = true;
  std::size_t channels = 1;
  NetworkSpec g_spec;
  NetworkSpec d_spec;
  NoiseKind noise_kind = NoiseKind::vector;
  std::size_t noise_dim = 100;
  bool class_conditional = false;
  std::size_t classes = 0;

  /// Per-example noise shape: {noise_dim} or {1, H, W}.
  Shape noise_shape() const;
  Shape coeff_shape() const { return {channels, size.height, size.width}; }
  /// Checks the invariants above, including G's input channel count.
  void validate() const;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

LevelSpec default_level_spec(const SizeSchedule& schedule, std::size_t k, std::size_t channels, std::size_t classes,
                             const ArchitectureConfig& arch = {});

struct TrainConfig {
  std::size_t iterations = 1000;
  std::size_t batch_size = 128;
  std::size_t d_steps = 1;
  std::size_t g_steps = 1;
  GeneratorLoss loss = GeneratorLoss::nonsaturating;
  SgdSchedule schedule;
  std::uint64_t seed = 0;
  /// Snapshot interval for the last-good model (and the checkpoint callback).
  std::size_t checkpoint_every = 0;

  void validate() const;
};

/// Trained (or training) pair for one level, including optimizer state so
/// that training can resume bit-exactly.
struct LevelModel {
  LevelSpec spec;
  Network<float> g;
  Network<float> d;
  std::vector<std::vector<Tensor>> g_velocity;
  std::vector<std::vector<Tensor>> d_velocity;
  std::string rng_state;
  std::size_t iteration = 0;
  bool trained = false;

  LevelModel(LevelSpec spec, std::uint64_t seed);
};

/// Fresh networks for a level, seeded from (config.seed, k).
LevelModel init_level(const LevelSpec& spec, std::uint64_t seed);

/// Per-example training targets for one level.
struct LevelData {
  Tensor h;          // {N, C, H, W}
  Tensor l;          // {N, C, H, W}, empty at the final level
  Tensor onehot;     // {N, classes}, empty when unconditional
};

LevelData prepare_level_data(const Dataset& ds, const SizeSchedule& schedule, std::size_t k, bool class_conditional);

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, LevelModel last_good)
      : Error(what), last_good_(std::move(last_good)) {}
  const LevelModel& last_good() const noexcept { return last_good_; }

 private:
  LevelModel last_good_;
};

struct TrainCallbacks {
  std::function<void(std::size_t iteration, std::size_t epoch, const TrainStepReport&)> on_step;
  std::function<void(const LevelModel&)> on_checkpoint;
};

/// Continues `model` until config.iterations. Each iteration runs d_steps
/// discriminator updates on Bernoulli(1/2) real/generated presentations,
/// then g_steps generator updates. The epoch used by the SGD schedule is
/// examples seen / dataset size.
void train_level(LevelModel& model, const LevelData& data, const TrainConfig& config,
                 const TrainCallbacks& callbacks = {});

/// Convenience: init + prepare + train.
LevelModel train_level(std::size_t k, const Dataset& ds, const LevelSpec& spec, const SizeSchedule& schedule,
                       const TrainConfig& config, const TrainCallbacks& callbacks = {});

Container level_to_container(const LevelModel& model);
LevelModel level_from_container(const Container& c);

struct CascadeModel {
  SizeSchedule schedule;
  std::size_t channels = 1;
  std::size_t classes = 0;
  std::vector<std::optional<LevelModel>> levels;  // index k = 0..K

  bool class_conditional() const { return classes > 0; }
  bool complete() const;
  bool trained() const;
  /// Throws InvalidState when a level is missing.
  const LevelModel& level(std::size_t k) const;
};

CascadeModel make_cascade(const SizeSchedule& schedule, std::size_t channels, std::size_t classes,
                          const ArchitectureConfig& arch, std::uint64_t seed);

struct TraceStep {
  std::size_t k;
  Tensor z;
  Image h;  // generated coefficients h~_k
  Image image;  // I~_k
};

struct SampleTrace {
  std::vector<TraceStep> steps;  // coarse to fine
};

struct Sample {
  Image image;
  SampleTrace trace;
  int label = -1;
};

/// Coarse-to-fine sampling: I_K = G_K(z_K) (or `start`), then
/// I_k = u(I_{k+1}) + G_k(z_k, u(I_{k+1})). Class-conditional cascades draw a
/// label from `rng` when none is given.
Sample sample(const CascadeModel& cascade, Rng& rng, const std::optional<Image>& start = std::nullopt,
              std::optional<int> label = std::nullopt);

/// n samples. With per_class, n samples per class grouped by label.
std::vector<Sample> sample_grid(const CascadeModel& cascade, std::size_t n, Rng& rng, bool per_class = false);

/// G_k applied to a batch. `condition` is {N, C, H, W} (empty at the final
/// level) and `labels` may be empty for unconditional cascades.
Tensor generate_level(const LevelModel& level, const Tensor& condition, std::span<const int> labels, std::size_t n,
                      Rng& rng);

struct Neighbor {
  std::size_t index = 0;
  double distance = 0;  // squared L2
};

Neighbor nearest_neighbor(const Image& query, const Dataset& trainset);

Tensor onehot(std::span<const int> labels, std::size_t classes);

}  // namespace lapgan
