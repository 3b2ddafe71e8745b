#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "lapgan/nn.hpp"
#include "lapgan/optim.hpp"
#include "lapgan/random.hpp"

namespace lapgan {

inline constexpr double kLogClamp = 1e-7;

enum class GeneratorLoss { nonsaturating, minimax };

std::string_view to_string(GeneratorLoss loss);
GeneratorLoss parse_generator_loss(std::string_view name);

/// One minibatch for a (G, D) pair. `real` holds data coefficients h, `noise`
/// the generator's z. When `condition` is present the discriminator sees
/// h + l as its main input and l again as a side input; G receives l as its
/// side input. `present_real` (optional) picks per example whether D is shown
/// the real or the generated coefficient; when empty D sees both for every
/// example.
template <class T>
struct GanBatch {
  BasicTensor<T> real;
  BasicTensor<T> noise;
  BasicTensor<T> condition;
  BasicTensor<T> class_onehot;
  std::vector<std::uint8_t> present_real;

  std::size_t size() const { return real.empty() ? 0 : real.dim(0); }
  void validate() const;
};

struct TrainStepReport {
  double d_loss = 0;
  double g_loss = 0;
  double d_acc_real = 0;
  double d_acc_fake = 0;
};

/// i.i.d. uniform on [-1, 1].
Tensor sample_noise(const Shape& shape, Rng& rng);
template <class T>
BasicTensor<T> sample_noise_as(const Shape& shape, Rng& rng);

/// Bernoulli(1/2) real/generated choice per example.
std::vector<std::uint8_t> choose_presentations(std::size_t n, Rng& rng);

/// mean log D(real) + mean log(1 - D(fake)), every log argument clamped at
/// kLogClamp. A side with no entries contributes nothing; both empty is an error.
double gan_objective(std::span<const double> d_real, std::span<const double> d_fake);

/// One descent step on -objective with respect to D's parameters; G is only read.
template <class T>
TrainStepReport d_step(Network<T>& d, SgdOptimizer<T>& opt, const Network<T>& g, const GanBatch<T>& batch,
                       std::size_t epoch, std::uint64_t seed);

/// One step on G's parameters through a frozen D. Minimax descends
/// E[log(1 - D(G(z)))]; nonsaturating ascends E[log D(G(z))].
template <class T>
TrainStepReport g_step(Network<T>& g, SgdOptimizer<T>& opt, const Network<T>& d, const GanBatch<T>& batch,
                       GeneratorLoss mode, std::size_t epoch, std::uint64_t seed);

/// Objective value on a batch without touching parameters (D and G in their
/// current modes, dropout driven by `seed`).
template <class T>
TrainStepReport evaluate_batch(const Network<T>& d, const Network<T>& g, const GanBatch<T>& batch, GeneratorLoss mode,
                               std::uint64_t seed);

/// Forward pass of G on the batch's noise and side inputs.
template <class T>
BasicTensor<T> generate(const Network<T>& g, const GanBatch<T>& batch, std::uint64_t seed);

/// D's probability for coefficients `h` under the batch's side inputs.
template <class T>
std::vector<double> discriminate(const Network<T>& d, const BasicTensor<T>& h, const GanBatch<T>& batch,
                                 std::uint64_t seed);

/// Line-delimited JSON telemetry: one record per iteration.
class TelemetryLog {
 public:
  TelemetryLog() = default;
  explicit TelemetryLog(const std::filesystem::path& path, bool append = false);

  void record(int level, std::size_t iteration, std::size_t epoch, const TrainStepReport& report);
  bool is_open() const { return out_.is_open(); }

 private:
  std::ofstream out_;
};

}  // namespace lapgan
