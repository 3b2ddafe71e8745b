#include "lapgan/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "lapgan/errors.hpp"
#include "lapgan/kernels.hpp"
#include "lapgan/random.hpp"

namespace lapgan {

namespace {

constexpr std::string_view kKindNames[] = {"dense",   "conv2d",          "relu",    "sigmoid",
                                           "dropout", "concat-channels", "reshape", "linear-class-embed"};

std::atomic<std::uint64_t> next_identity{1};

Shape with_batch(std::size_t batch, const Shape& shape) {
  Shape out{batch};
  out.insert(out.end(), shape.begin(), shape.end());
  return out;
}

std::string layer_name(std::size_t index, const LayerSpec& spec) {
  return "layer " + std::to_string(index) + " (" + std::string(to_string(spec.kind)) + ")";
}

kernels::ConvGeometry conv_geometry(std::size_t batch, const Shape& in, const LayerSpec& spec) {
  return {.batch = batch, .in_channels = in[0], .in_height = in[1], .in_width = in[2],
          .out_channels = spec.out_channels, .kernel = spec.kernel, .stride = spec.stride,
          .padding = spec.padding};
}

// Per-sample concatenation of two row blocks.
template <class T>
BasicTensor<T> append_rows(const BasicTensor<T>& a, const BasicTensor<T>& b, Shape out_shape) {
  const std::size_t n = a.dim(0), ra = a.row_size(), rb = b.row_size();
  BasicTensor<T> out(std::move(out_shape));
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(i);
    std::copy_n(a.row(i).begin(), ra, dst.begin());
    std::copy_n(b.row(i).begin(), rb, dst.begin() + ra);
  }
  return out;
}

// Inverse of append_rows: first `ra` values of each row go to `head`, the rest to `tail`.
template <class T>
void split_rows(const BasicTensor<T>& g, std::size_t ra, BasicTensor<T>& head, BasicTensor<T>& tail) {
  const std::size_t n = g.dim(0), rb = g.row_size() - ra;
  for (std::size_t i = 0; i < n; ++i) {
    auto src = g.row(i);
    std::copy_n(src.begin(), ra, head.data().begin() + i * ra);
    std::copy_n(src.begin() + ra, rb, tail.data().begin() + i * rb);
  }
}

template <class T>
void add_into(BasicTensor<T>& acc, const BasicTensor<T>& add) {
  if (acc.empty()) {
    acc = add;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += add[i];
}

}  // namespace

std::string_view to_string(LayerKind kind) { return kKindNames[static_cast<int>(kind)]; }

LayerKind parse_layer_kind(std::string_view name) {
  for (std::size_t i = 0; i < std::size(kKindNames); ++i)
    if (kKindNames[i] == name) return static_cast<LayerKind>(i);
  throw InvalidArgument("unknown layer kind '" + std::string(name) + "'");
}

template <class T>
Network<T>::Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), identity_(next_identity++) {
  if (spec_.input_shape.empty() || numel(spec_.input_shape) == 0) throw InvalidArgument("network input shape is empty");
  Rng rng(seed);
  auto init = [&](Shape shape, std::size_t fan_in) {
    BasicTensor<T> t(std::move(shape));
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : t.values()) v = static_cast<T>(bound * uniform_pm1(rng));
    return t;
  };

  Shape current = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& ls = spec_.layers[i];
    Layer layer{ls, current, {}, {}};
    switch (ls.kind) {
      case LayerKind::dense: {
        if (ls.units == 0) throw InvalidArgument(layer_name(i, ls) + " needs units > 0");
        const std::size_t in = numel(current);
        layer.params.push_back(init({ls.units, in}, in));
        layer.params.push_back(init({ls.units}, in));
        layer.out_shape = {ls.units};
        break;
      }
      case LayerKind::conv2d: {
        if (current.size() != 3) throw InvalidArgument(layer_name(i, ls) + " needs a {C, H, W} input");
        if (ls.out_channels == 0 || ls.kernel == 0 || ls.stride == 0) {
          throw InvalidArgument(layer_name(i, ls) + " needs positive channels, kernel and stride");
        }
        if (current[1] + 2 * ls.padding < ls.kernel || current[2] + 2 * ls.padding < ls.kernel) {
          throw InvalidArgument(layer_name(i, ls) + " kernel larger than padded input " + to_string(current));
        }
        const auto g = conv_geometry(1, current, ls);
        const std::size_t fan_in = current[0] * ls.kernel * ls.kernel;
        layer.params.push_back(init({ls.out_channels, current[0], ls.kernel, ls.kernel}, fan_in));
        layer.params.push_back(init({ls.out_channels}, fan_in));
        layer.out_shape = {ls.out_channels, g.out_height(), g.out_width()};
        break;
      }
      case LayerKind::relu:
      case LayerKind::sigmoid:
        layer.out_shape = current;
        break;
      case LayerKind::dropout:
        if (!(ls.drop_probability >= 0.0 && ls.drop_probability < 1.0)) {
          throw InvalidArgument(layer_name(i, ls) + " drop probability must lie in [0, 1)");
        }
        layer.out_shape = current;
        break;
      case LayerKind::concat_channels: {
        const Shape& cond = spec_.condition_shape;
        if (cond.empty()) throw InvalidArgument(layer_name(i, ls) + " but the network has no condition input");
        if (current.size() == 3) {
          if (cond.size() != 3 || cond[1] != current[1] || cond[2] != current[2]) {
            throw InvalidArgument(layer_name(i, ls) + " condition " + to_string(cond) +
                                  " does not match activation " + to_string(current));
          }
          layer.out_shape = {current[0] + cond[0], current[1], current[2]};
        } else if (current.size() == 1) {
          layer.out_shape = {current[0] + numel(cond)};
        } else {
          throw InvalidArgument(layer_name(i, ls) + " needs a {C, H, W} or flat activation");
        }
        break;
      }
      case LayerKind::reshape:
        if (numel(ls.target_shape) != numel(current) || ls.target_shape.empty()) {
          throw InvalidArgument(layer_name(i, ls) + " cannot reshape " + to_string(current) + " to " +
                                to_string(ls.target_shape));
        }
        layer.out_shape = ls.target_shape;
        break;
      case LayerKind::class_embed: {
        if (spec_.classes == 0) throw InvalidArgument(layer_name(i, ls) + " but the network has no class input");
        std::size_t width = 0;
        if (current.size() == 3) {
          width = current[1] * current[2];
          layer.out_shape = {current[0] + 1, current[1], current[2]};
        } else if (current.size() == 1) {
          if (ls.units == 0) throw InvalidArgument(layer_name(i, ls) + " on flat activations needs units > 0");
          width = ls.units;
          layer.out_shape = {current[0] + width};
        } else {
          throw InvalidArgument(layer_name(i, ls) + " needs a {C, H, W} or flat activation");
        }
        layer.params.push_back(init({width, spec_.classes}, spec_.classes));
        layer.params.push_back(init({width}, spec_.classes));
        break;
      }
    }
    current = layer.out_shape;
    layers_.push_back(std::move(layer));
  }
}

template <class T>
const Shape& Network<T>::output_shape() const {
  return layers_.empty() ? spec_.input_shape : layers_.back().out_shape;
}

template <class T>
std::vector<BasicTensor<T>>& Network<T>::mutable_parameters(std::size_t layer) {
  ++generation_;
  return layers_.at(layer).params;
}

template <class T>
std::size_t Network<T>::parameter_count() const noexcept {
  std::size_t total = 0;
  for (const auto& l : layers_)
    for (const auto& p : l.params) total += p.size();
  return total;
}

template <class T>
void Network<T>::check_inputs(const NetInputs<T>& in) const {
  if (in.x.rank() == 0 || in.x.dim(0) == 0) throw InvalidArgument("network input batch is empty");
  const std::size_t n = in.x.dim(0);
  if (in.x.shape() != with_batch(n, spec_.input_shape)) {
    throw InvalidArgument("network input " + to_string(in.x.shape()) + " does not match declared " +
                          to_string(with_batch(n, spec_.input_shape)));
  }
  if (!spec_.condition_shape.empty() && in.condition.shape() != with_batch(n, spec_.condition_shape)) {
    throw InvalidArgument("condition input " + to_string(in.condition.shape()) + " does not match declared " +
                          to_string(with_batch(n, spec_.condition_shape)));
  }
  if (spec_.classes > 0 && in.class_onehot.shape() != Shape{n, spec_.classes}) {
    throw InvalidArgument("class input " + to_string(in.class_onehot.shape()) + " does not match declared " +
                          to_string(Shape{n, spec_.classes}));
  }
}

template <class T>
ForwardResult<T> Network<T>::forward(const NetInputs<T>& in, std::uint64_t seed) const {
  check_inputs(in);
  const std::size_t n = in.x.dim(0);
  Tape<T> tape{identity_, generation_, mode_, {in.x}, std::vector<BasicTensor<T>>(layers_.size()), in.condition,
               in.class_onehot};
  tape.activations.reserve(layers_.size() + 1);

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& layer = layers_[i];
    const BasicTensor<T>& x = tape.activations.back();
    BasicTensor<T> y;
    switch (layer.spec.kind) {
      case LayerKind::dense: {
        const kernels::DenseGeometry g{n, numel(layer.in_shape), layer.spec.units};
        y = BasicTensor<T>(with_batch(n, layer.out_shape));
        kernels::omp::dense_forward<T>(g, x.data(), layer.params[0].data(), layer.params[1].data(), y.data());
        break;
      }
      case LayerKind::conv2d: {
        y = BasicTensor<T>(with_batch(n, layer.out_shape));
        kernels::omp::conv2d_forward<T>(conv_geometry(n, layer.in_shape, layer.spec), x.data(),
                                        layer.params[0].data(), layer.params[1].data(), y.data());
        break;
      }
      case LayerKind::relu:
        y = x;
        for (auto& v : y.values()) v = v > T{0} ? v : T{0};
        break;
      case LayerKind::sigmoid:
        y = x;
        for (auto& v : y.values()) {
          if (v >= T{0}) {
            v = T{1} / (T{1} + std::exp(-v));
          } else {
            const T e = std::exp(v);
            v = e / (T{1} + e);
          }
        }
        break;
      case LayerKind::dropout:
        y = x;
        if (mode_ == Mode::train && layer.spec.drop_probability > 0.0) {
          Rng rng(derive_seed(seed, i));
          const double keep = 1.0 - layer.spec.drop_probability;
          BasicTensor<T> mask(x.shape());
          for (auto& m : mask.values()) m = uniform01(rng) < keep ? static_cast<T>(1.0 / keep) : T{0};
          for (std::size_t j = 0; j < y.size(); ++j) y[j] *= mask[j];
          tape.masks[i] = std::move(mask);
        }
        break;
      case LayerKind::concat_channels:
        y = append_rows(x, in.condition, with_batch(n, layer.out_shape));
        break;
      case LayerKind::reshape:
        y = x.reshaped(with_batch(n, layer.out_shape));
        break;
      case LayerKind::class_embed: {
        const std::size_t width = layer.params[1].size();
        BasicTensor<T> embed({n, width});
        kernels::omp::dense_forward<T>({n, spec_.classes, width}, in.class_onehot.data(), layer.params[0].data(),
                                       layer.params[1].data(), embed.data());
        y = append_rows(x, embed, with_batch(n, layer.out_shape));
        break;
      }
    }
    if (!y.all_finite()) throw NumericOverflow("non-finite activation after " + layer_name(i, layer.spec));
    tape.activations.push_back(std::move(y));
  }
  return {tape.activations.back(), std::move(tape)};
}

template <class T>
Gradients<T> Network<T>::backward(const Tape<T>& tape, const BasicTensor<T>& output_grad) const {
  return backward_from(tape, layers_.size(), output_grad);
}

template <class T>
Gradients<T> Network<T>::backward_from(const Tape<T>& tape, std::size_t top, const BasicTensor<T>& top_grad) const {
  if (tape.owner != identity_ || tape.generation != generation_ || tape.activations.size() != layers_.size() + 1) {
    throw InvalidState("tape does not belong to the current network parameters");
  }
  if (top > layers_.size()) throw InvalidArgument("backward start layer is out of range");
  if (top_grad.shape() != tape.activations[top].shape()) {
    throw InvalidArgument("gradient " + to_string(top_grad.shape()) + " does not match activation " +
                          to_string(tape.activations[top].shape()));
  }
  const std::size_t n = top_grad.dim(0);
  Gradients<T> grads;
  grads.params.resize(layers_.size());
  for (std::size_t i = top; i < layers_.size(); ++i)
    for (const auto& p : layers_[i].params) grads.params[i].emplace_back(p.shape());
  BasicTensor<T> g = top_grad;

  for (std::size_t i = top; i-- > 0;) {
    const Layer& layer = layers_[i];
    const BasicTensor<T>& x = tape.activations[i];
    const BasicTensor<T>& y = tape.activations[i + 1];
    BasicTensor<T> dx(x.shape());
    switch (layer.spec.kind) {
      case LayerKind::dense: {
        const kernels::DenseGeometry geo{n, numel(layer.in_shape), layer.spec.units};
        BasicTensor<T> dw(layer.params[0].shape()), db(layer.params[1].shape());
        kernels::omp::dense_backward_params<T>(geo, g.data(), x.data(), dw.data(), db.data());
        kernels::omp::dense_backward_input<T>(geo, g.data(), layer.params[0].data(), dx.data());
        grads.params[i] = {std::move(dw), std::move(db)};
        break;
      }
      case LayerKind::conv2d: {
        const auto geo = conv_geometry(n, layer.in_shape, layer.spec);
        BasicTensor<T> dw(layer.params[0].shape()), db(layer.params[1].shape());
        kernels::omp::conv2d_backward_params<T>(geo, g.data(), x.data(), dw.data(), db.data());
        kernels::omp::conv2d_backward_input<T>(geo, g.data(), layer.params[0].data(), dx.data());
        grads.params[i] = {std::move(dw), std::move(db)};
        break;
      }
      case LayerKind::relu:
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = x[j] > T{0} ? g[j] : T{0};
        break;
      case LayerKind::sigmoid:
        for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = g[j] * y[j] * (T{1} - y[j]);
        break;
      case LayerKind::dropout:
        if (tape.masks[i].empty()) {
          dx = g;
        } else {
          for (std::size_t j = 0; j < dx.size(); ++j) dx[j] = g[j] * tape.masks[i][j];
        }
        break;
      case LayerKind::concat_channels: {
        BasicTensor<T> dcond(tape.condition.shape());
        split_rows(g, x.row_size(), dx, dcond);
        add_into(grads.condition, dcond);
        break;
      }
      case LayerKind::reshape:
        dx = g.reshaped(x.shape());
        break;
      case LayerKind::class_embed: {
        const std::size_t width = layer.params[1].size();
        BasicTensor<T> dembed({n, width});
        split_rows(g, x.row_size(), dx, dembed);
        const kernels::DenseGeometry geo{n, spec_.classes, width};
        BasicTensor<T> dw(layer.params[0].shape()), db(layer.params[1].shape());
        kernels::omp::dense_backward_params<T>(geo, dembed.data(), tape.class_onehot.data(), dw.data(), db.data());
        BasicTensor<T> donehot(tape.class_onehot.shape());
        kernels::omp::dense_backward_input<T>(geo, dembed.data(), layer.params[0].data(), donehot.data());
        add_into(grads.class_onehot, donehot);
        grads.params[i] = {std::move(dw), std::move(db)};
        break;
      }
    }
    g = std::move(dx);
  }
  grads.input = std::move(g);
  return grads;
}

template class Network<float>;
template class Network<double>;

}  // namespace lapgan
