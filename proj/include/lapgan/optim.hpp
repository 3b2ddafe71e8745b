#pragma once

#include <cstddef>
#include <vector>

#include "lapgan/nn.hpp"

namespace lapgan {

/// Per-epoch learning rate and momentum:
///   lr(e)       = lr0 / lr_decay^e
///   momentum(e) = min(momentum0 + momentum_step * e, momentum_max)
struct SgdSchedule {
  double lr0 = 0.02;
  double lr_decay = 1.0 + 4e-5;
  double momentum0 = 0.5;
  double momentum_step = 0.0008;
  double momentum_max = 0.8;

  double learning_rate(std::size_t epoch) const;
  double momentum(std::size_t epoch) const;
  void validate() const;

  friend bool operator==(const SgdSchedule&, const SgdSchedule&) = default;
};

/// Classical momentum: v <- m v - lr g;  theta <- theta + v.
template <class T>
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdSchedule schedule = {});

  void step(Network<T>& net, const Gradients<T>& grads, std::size_t epoch);

  const SgdSchedule& schedule() const noexcept { return schedule_; }
  const std::vector<std::vector<BasicTensor<T>>>& velocity() const noexcept { return velocity_; }
  void set_velocity(std::vector<std::vector<BasicTensor<T>>> velocity) { velocity_ = std::move(velocity); }

 private:
  SgdSchedule schedule_;
  std::vector<std::vector<BasicTensor<T>>> velocity_;
};

extern template class SgdOptimizer<float>;
extern template class SgdOptimizer<double>;

}  // namespace lapgan
