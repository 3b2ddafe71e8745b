#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lapgan/tensor.hpp"

namespace lapgan {

enum class LayerKind { dense, conv2d, relu, sigmoid, dropout, concat_channels, reshape, class_embed };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

/// Declarative description of one layer. Only the fields relevant to `kind`
/// are read.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t units = 0;         // dense width; class_embed width on flat activations
  std::size_t out_channels = 0;  // conv2d
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;
  double drop_probability = 0.5;
  Shape target_shape;  // reshape, per sample

  static LayerSpec dense(std::size_t units) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.units = units;
    return s;
  }
  static LayerSpec conv(std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.out_channels = out_channels;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    return s;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec sigmoid() {
    LayerSpec s;
    s.kind = LayerKind::sigmoid;
    return s;
  }
  static LayerSpec dropout(double p) {
    LayerSpec s;
    s.kind = LayerKind::dropout;
    s.drop_probability = p;
    return s;
  }
  /// Appends the network's conditioning input along the channel (or feature) axis.
  static LayerSpec concat_condition() {
    LayerSpec s;
    s.kind = LayerKind::concat_channels;
    return s;
  }
  static LayerSpec reshape(Shape shape) {
    LayerSpec s;
    s.kind = LayerKind::reshape;
    s.target_shape = std::move(shape);
    return s;
  }
  /// Linear map of the one-hot class vector, appended as one extra plane
  /// (or `units` extra features on flat activations).
  static LayerSpec class_embed(std::size_t units = 0) {
    LayerSpec s;
    s.kind = LayerKind::class_embed;
    s.units = units;
    return s;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Sequential stack with two optional side inputs: a conditioning tensor and
/// a one-hot class vector. Shapes exclude the batch axis.
struct NetworkSpec {
  Shape input_shape;
  Shape condition_shape;
  std::size_t classes = 0;
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

enum class Mode { train, eval };

/// Batched inputs. Empty side tensors mean "not supplied".
template <class T>
struct NetInputs {
  BasicTensor<T> x;
  BasicTensor<T> condition;
  BasicTensor<T> class_onehot;
};

template <class T>
struct Tape {
  std::uint64_t owner = 0;
  std::uint64_t generation = 0;
  Mode mode = Mode::eval;
  std::vector<BasicTensor<T>> activations;  // [input, out_0, ..., out_{L-1}]
  std::vector<BasicTensor<T>> masks;        // per layer; non-empty for active dropout
  BasicTensor<T> condition;
  BasicTensor<T> class_onehot;
};

template <class T>
struct ForwardResult {
  BasicTensor<T> output;
  Tape<T> tape;
};

template <class T>
struct Gradients {
  std::vector<std::vector<BasicTensor<T>>> params;  // per layer, same order as Network::parameters
  BasicTensor<T> input;
  BasicTensor<T> condition;
  BasicTensor<T> class_onehot;
};

template <class T>
class Network {
 public:
  /// Validates layer shapes and draws weights uniform in +-1/sqrt(fan_in).
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  const Shape& output_shape() const;
  const Shape& layer_output_shape(std::size_t layer) const { return layers_.at(layer).out_shape; }

  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode mode) noexcept { mode_ = mode; }

  /// Deterministic in (parameters, inputs, seed); the seed only drives dropout.
  ForwardResult<T> forward(const NetInputs<T>& inputs, std::uint64_t seed = 0) const;
  Gradients<T> backward(const Tape<T>& tape, const BasicTensor<T>& output_grad) const;
  /// Starts backpropagation at the input of `layer`: `grad` is the gradient
  /// with respect to tape.activations[layer]. Layers from `layer` on get zero
  /// parameter gradients.
  Gradients<T> backward_from(const Tape<T>& tape, std::size_t layer, const BasicTensor<T>& grad) const;

  const std::vector<BasicTensor<T>>& parameters(std::size_t layer) const { return layers_.at(layer).params; }
  /// Mutable access invalidates outstanding tapes.
  std::vector<BasicTensor<T>>& mutable_parameters(std::size_t layer);
  std::size_t parameter_count() const noexcept;
  std::uint64_t generation() const noexcept { return generation_; }

  template <class U>
  Network<U> cast() const {
    Network<U> out(spec_, 0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      auto& dst = out.mutable_parameters(l);
      for (std::size_t p = 0; p < dst.size(); ++p) dst[p] = layers_[l].params[p].template cast<U>();
    }
    out.set_mode(mode_);
    return out;
  }

 private:
  struct Layer {
    LayerSpec spec;
    Shape in_shape;
    Shape out_shape;
    std::vector<BasicTensor<T>> params;
  };

  void check_inputs(const NetInputs<T>& inputs) const;

  NetworkSpec spec_;
  std::vector<Layer> layers_;
  Mode mode_ = Mode::train;
  std::uint64_t generation_ = 0;
  std::uint64_t identity_ = 0;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace lapgan
