#include "lapgan/optim.hpp"

#include <algorithm>
#include <cmath>

#include "lapgan/errors.hpp"

namespace lapgan {

double SgdSchedule::learning_rate(std::size_t epoch) const {
  return lr0 / std::pow(lr_decay, static_cast<double>(epoch));
}

double SgdSchedule::momentum(std::size_t epoch) const {
  return std::min(momentum0 + momentum_step * static_cast<double>(epoch), momentum_max);
}

void SgdSchedule::validate() const {
  if (!(lr0 > 0.0) || !(lr_decay >= 1.0)) throw InvalidArgument("SGD schedule needs lr0 > 0 and lr_decay >= 1");
  if (!(momentum0 >= 0.0) || !(momentum_step >= 0.0) || !(momentum_max < 1.0) || momentum0 > momentum_max) {
    throw InvalidArgument("SGD momentum must stay within [0, 1) and momentum0 <= momentum_max");
  }
}

template <class T>
SgdOptimizer<T>::SgdOptimizer(SgdSchedule schedule) : schedule_(schedule) {
  schedule_.validate();
}

template <class T>
void SgdOptimizer<T>::step(Network<T>& net, const Gradients<T>& grads, std::size_t epoch) {
  if (grads.params.size() != net.layer_count()) throw InvalidArgument("gradient layer count does not match network");
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const auto& params = net.parameters(l);
    if (grads.params[l].size() != params.size()) {
      throw InvalidArgument("gradient count mismatch at layer " + std::to_string(l));
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
      if (grads.params[l][p].shape() != params[p].shape()) {
        throw InvalidArgument("gradient shape " + to_string(grads.params[l][p].shape()) + " does not match parameter " +
                              to_string(params[p].shape()) + " at layer " + std::to_string(l));
      }
    }
  }
  if (velocity_.size() != net.layer_count()) {
    velocity_.assign(net.layer_count(), {});
    for (std::size_t l = 0; l < net.layer_count(); ++l)
      for (const auto& p : net.parameters(l)) velocity_[l].emplace_back(p.shape());
  }

  const T lr = static_cast<T>(schedule_.learning_rate(epoch));
  const T m = static_cast<T>(schedule_.momentum(epoch));
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    if (net.parameters(l).empty()) continue;
    auto& params = net.mutable_parameters(l);
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& v = velocity_[l][p];
      const auto& g = grads.params[l][p];
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = m * v[i] - lr * g[i];
        params[p][i] += v[i];
      }
    }
  }
}

template class SgdOptimizer<float>;
template class SgdOptimizer<double>;

}  // namespace lapgan
