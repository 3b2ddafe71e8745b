#include "lapgan/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "lapgan/errors.hpp"

namespace lapgan {

std::string_view to_string(GeneratorLoss loss) {
  return loss == GeneratorLoss::minimax ? "minimax" : "nonsaturating";
}

GeneratorLoss parse_generator_loss(std::string_view name) {
  if (name == "minimax") return GeneratorLoss::minimax;
  if (name == "nonsaturating") return GeneratorLoss::nonsaturating;
  throw InvalidArgument("unknown generator loss '" + std::string(name) + "'");
}

template <class T>
void GanBatch<T>::validate() const {
  const std::size_t n = size();
  if (n == 0) throw InvalidArgument("GAN batch is empty");
  if (noise.rank() == 0 || noise.dim(0) != n) throw InvalidArgument("noise batch size does not match real batch");
  if (!condition.empty()) {
    if (condition.shape() != real.shape())
      throw InvalidArgument("condition " + to_string(condition.shape()) + " must match coefficients " +
                            to_string(real.shape()));
  }
  if (!class_onehot.empty() && (class_onehot.rank() != 2 || class_onehot.dim(0) != n))
    throw InvalidArgument("class batch size does not match real batch");
  if (!present_real.empty() && present_real.size() != n)
    throw InvalidArgument("presentation mask size does not match batch");
}

Tensor sample_noise(const Shape& shape, Rng& rng) { return sample_noise_as<float>(shape, rng); }

template <class T>
BasicTensor<T> sample_noise_as(const Shape& shape, Rng& rng) {
  BasicTensor<T> z(shape);
  for (auto& v : z.values()) v = static_cast<T>(uniform_pm1(rng));
  return z;
}

std::vector<std::uint8_t> choose_presentations(std::size_t n, Rng& rng) {
  std::vector<std::uint8_t> out(n);
  for (auto& v : out) v = uniform01(rng) < 0.5 ? 1 : 0;
  return out;
}

namespace {

double clamped_log(double p) { return std::log(std::max(p, kLogClamp)); }

// Backpropagates sign * (-log q) averaged over n, where q = p for target 1
// and q = 1 - p for target 0. When D ends in a sigmoid the gradient enters at
// the logit a as sign * (sigmoid(a) - target) / n, which stays exact when p
// rounds to 0 or 1 in float32. Otherwise dL/dp uses 1/q floored at kLogClamp.
template <class T>
Gradients<T> probability_backward(const Network<T>& d, const ForwardResult<T>& fwd, int target, double sign,
                                  double n) {
  const std::size_t top = d.layer_count();
  if (top > 0 && d.spec().layers.back().kind == LayerKind::sigmoid) {
    const BasicTensor<T>& logits = fwd.tape.activations[top - 1];
    BasicTensor<T> grad(logits.shape());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double a = logits[i];
      // sigmoid(a) - 1 = -sigmoid(-a)
      const double r = target == 1 ? -1.0 / (1.0 + std::exp(a)) : 1.0 / (1.0 + std::exp(-a));
      grad[i] = static_cast<T>(sign * r / n);
    }
    return d.backward_from(fwd.tape, top - 1, grad);
  }
  BasicTensor<T> grad(fwd.output.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double p = fwd.output[i];
    const double dldp = target == 1 ? -1.0 / std::max(p, kLogClamp) : 1.0 / std::max(1.0 - p, kLogClamp);
    grad[i] = static_cast<T>(sign * dldp / n);
  }
  return d.backward(fwd.tape, grad);
}

template <class T>
NetInputs<T> d_inputs(const BasicTensor<T>& h, const GanBatch<T>& batch) {
  NetInputs<T> in{h, batch.condition, batch.class_onehot};
  if (!batch.condition.empty()) {
    for (std::size_t i = 0; i < in.x.size(); ++i) in.x[i] += batch.condition[i];
  }
  return in;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericOverflow(std::string(what) + " is not finite");
}

}  // namespace

double gan_objective(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() && d_fake.empty()) throw InvalidArgument("gan_objective needs at least one probability");
  double total = 0;
  if (!d_real.empty()) {
    double s = 0;
    for (double p : d_real) s += clamped_log(p);
    total += s / static_cast<double>(d_real.size());
  }
  if (!d_fake.empty()) {
    double s = 0;
    for (double p : d_fake) s += clamped_log(1.0 - p);
    total += s / static_cast<double>(d_fake.size());
  }
  return total;
}

template <class T>
BasicTensor<T> generate(const Network<T>& g, const GanBatch<T>& batch, std::uint64_t seed) {
  auto out = g.forward({batch.noise, batch.condition, batch.class_onehot}, seed).output;
  if (out.shape() != batch.real.shape())
    throw InvalidArgument("generator output " + to_string(out.shape()) + " does not match coefficients " +
                          to_string(batch.real.shape()));
  return out;
}

template <class T>
std::vector<double> discriminate(const Network<T>& d, const BasicTensor<T>& h, const GanBatch<T>& batch,
                                 std::uint64_t seed) {
  const auto out = d.forward(d_inputs(h, batch), seed).output;
  if (out.size() != h.dim(0)) throw InvalidArgument("discriminator must emit one probability per example");
  return {out.values().begin(), out.values().end()};
}

namespace {

struct Split {
  std::vector<std::size_t> real_idx;
  std::vector<std::size_t> fake_idx;
};

template <class T>
Split split_presentations(const GanBatch<T>& batch) {
  Split s;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.present_real.empty() || batch.present_real[i]) s.real_idx.push_back(i);
    if (batch.present_real.empty() || !batch.present_real[i]) s.fake_idx.push_back(i);
  }
  return s;
}

template <class T>
BasicTensor<T> gather(const BasicTensor<T>& t, const std::vector<std::size_t>& idx) {
  if (t.empty()) return t;
  Shape shape = t.shape();
  shape[0] = idx.size();
  BasicTensor<T> out(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) std::ranges::copy(t.row(idx[i]), out.row(i).begin());
  return out;
}

template <class T>
GanBatch<T> subset(const GanBatch<T>& b, const std::vector<std::size_t>& idx) {
  return {gather(b.real, idx), gather(b.noise, idx), gather(b.condition, idx), gather(b.class_onehot, idx), {}};
}

double accuracy(const std::vector<double>& p, bool real) {
  if (p.empty()) return 0;
  std::size_t ok = 0;
  for (double v : p) ok += real ? (v > 0.5) : (v < 0.5);
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

template <class T>
double generator_loss(const std::vector<double>& p_fake, GeneratorLoss mode) {
  double s = 0;
  for (double p : p_fake) s += mode == GeneratorLoss::minimax ? clamped_log(1.0 - p) : -clamped_log(p);
  return s / static_cast<double>(p_fake.size());
}

}  // namespace

template <class T>
TrainStepReport d_step(Network<T>& d, SgdOptimizer<T>& opt, const Network<T>& g, const GanBatch<T>& batch,
                       std::size_t epoch, std::uint64_t seed) {
  batch.validate();
  const Split split = split_presentations(batch);
  TrainStepReport report;
  std::vector<double> p_real, p_fake;
  Gradients<T> total;

  auto accumulate = [&](const Gradients<T>& grads) {
    if (total.params.empty()) {
      total.params = grads.params;
      return;
    }
    for (std::size_t l = 0; l < grads.params.size(); ++l)
      for (std::size_t p = 0; p < grads.params[l].size(); ++p)
        for (std::size_t i = 0; i < grads.params[l][p].size(); ++i) total.params[l][p][i] += grads.params[l][p][i];
  };

  if (!split.real_idx.empty()) {
    const GanBatch<T> sub = subset(batch, split.real_idx);
    auto fwd = d.forward(d_inputs(sub.real, sub), derive_seed(seed, 1));
    const double n = static_cast<double>(split.real_idx.size());
    p_real.assign(fwd.output.values().begin(), fwd.output.values().end());
    accumulate(probability_backward(d, fwd, 1, 1.0, n));
  }
  if (!split.fake_idx.empty()) {
    const GanBatch<T> sub = subset(batch, split.fake_idx);
    const BasicTensor<T> fake = generate(g, sub, derive_seed(seed, 2));
    auto fwd = d.forward(d_inputs(fake, sub), derive_seed(seed, 3));
    const double n = static_cast<double>(split.fake_idx.size());
    p_fake.assign(fwd.output.values().begin(), fwd.output.values().end());
    accumulate(probability_backward(d, fwd, 0, 1.0, n));
  }

  report.d_loss = -gan_objective(p_real, p_fake);
  report.g_loss = p_fake.empty() ? 0.0 : generator_loss<T>(p_fake, GeneratorLoss::nonsaturating);
  report.d_acc_real = accuracy(p_real, true);
  report.d_acc_fake = accuracy(p_fake, false);
  check_finite(report.d_loss, "discriminator loss");
  opt.step(d, total, epoch);
  return report;
}

template <class T>
TrainStepReport g_step(Network<T>& g, SgdOptimizer<T>& opt, const Network<T>& d, const GanBatch<T>& batch,
                       GeneratorLoss mode, std::size_t epoch, std::uint64_t seed) {
  batch.validate();
  auto g_fwd = g.forward({batch.noise, batch.condition, batch.class_onehot}, derive_seed(seed, 2));
  if (g_fwd.output.shape() != batch.real.shape())
    throw InvalidArgument("generator output " + to_string(g_fwd.output.shape()) + " does not match coefficients " +
                          to_string(batch.real.shape()));
  auto d_fwd = d.forward(d_inputs(g_fwd.output, batch), derive_seed(seed, 3));

  const double n = static_cast<double>(batch.size());
  const std::vector<double> p_fake(d_fwd.output.values().begin(), d_fwd.output.values().end());
  TrainStepReport report;
  report.g_loss = generator_loss<T>(p_fake, mode);
  report.d_loss = -gan_objective({}, p_fake);
  report.d_acc_fake = accuracy(p_fake, false);
  check_finite(report.g_loss, "generator loss");

  // d(h + l)/dh is the identity, so D's input gradient is the gradient on G's output.
  // minimax: minimize log(1 - p) = -(-log(1 - p)); non-saturating: minimize -log p.
  const auto d_grads = mode == GeneratorLoss::minimax ? probability_backward(d, d_fwd, 0, -1.0, n)
                                                      : probability_backward(d, d_fwd, 1, 1.0, n);
  opt.step(g, g.backward(g_fwd.tape, d_grads.input), epoch);
  return report;
}

template <class T>
TrainStepReport evaluate_batch(const Network<T>& d, const Network<T>& g, const GanBatch<T>& batch, GeneratorLoss mode,
                               std::uint64_t seed) {
  batch.validate();
  const Split split = split_presentations(batch);
  std::vector<double> p_real, p_fake;
  if (!split.real_idx.empty()) {
    const GanBatch<T> sub = subset(batch, split.real_idx);
    p_real = discriminate(d, sub.real, sub, derive_seed(seed, 1));
  }
  if (!split.fake_idx.empty()) {
    const GanBatch<T> sub = subset(batch, split.fake_idx);
    p_fake = discriminate(d, generate(g, sub, derive_seed(seed, 2)), sub, derive_seed(seed, 3));
  }
  TrainStepReport r;
  r.d_loss = -gan_objective(p_real, p_fake);
  r.g_loss = p_fake.empty() ? 0.0 : generator_loss<T>(p_fake, mode);
  r.d_acc_real = accuracy(p_real, true);
  r.d_acc_fake = accuracy(p_fake, false);
  return r;
}

TelemetryLog::TelemetryLog(const std::filesystem::path& path, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc) {
  if (!out_) throw InvalidArgument("cannot open telemetry log " + path.string());
}

void TelemetryLog::record(int level, std::size_t iteration, std::size_t epoch, const TrainStepReport& r) {
  if (!out_.is_open()) return;
  const nlohmann::json j{{"level", level},       {"iteration", iteration},   {"epoch", epoch},
                         {"d_loss", r.d_loss},   {"g_loss", r.g_loss},       {"d_acc_real", r.d_acc_real},
                         {"d_acc_fake", r.d_acc_fake}};
  out_ << j.dump() << '\n';
}

#define LAPGAN_INSTANTIATE(T)                                                                                      \
  template struct GanBatch<T>;                                                                                     \
  template BasicTensor<T> sample_noise_as<T>(const Shape&, Rng&);                                                  \
  template BasicTensor<T> generate<T>(const Network<T>&, const GanBatch<T>&, std::uint64_t);                       \
  template std::vector<double> discriminate<T>(const Network<T>&, const BasicTensor<T>&, const GanBatch<T>&,       \
                                               std::uint64_t);                                                     \
  template TrainStepReport d_step<T>(Network<T>&, SgdOptimizer<T>&, const Network<T>&, const GanBatch<T>&,         \
                                     std::size_t, std::uint64_t);                                                  \
  template TrainStepReport g_step<T>(Network<T>&, SgdOptimizer<T>&, const Network<T>&, const GanBatch<T>&,         \
                                     GeneratorLoss, std::size_t, std::uint64_t);                                   \
  template TrainStepReport evaluate_batch<T>(const Network<T>&, const Network<T>&, const GanBatch<T>&,             \
                                             GeneratorLoss, std::uint64_t);

LAPGAN_INSTANTIATE(float)
LAPGAN_INSTANTIATE(double)

}  // namespace lapgan
