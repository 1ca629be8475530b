#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bwn/layers.hpp"
#include "bwn/rng.hpp"
#include "bwn/tensor.hpp"

namespace bwn {

enum class LayerKind { dense, conv2d, batchnorm, relu, flatten };

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

/// Declarative description of one layer. Weight-bearing layers (dense,
/// conv2d) are the ones binarization acts on.
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::size_t in = 0, out = 0;                          // dense
  std::size_t in_ch = 0, out_ch = 0, kernel = 0;        // conv2d
  std::size_t stride = 1, pad = 0;                      // conv2d
  std::size_t features = 0;                             // batchnorm

  bool has_weights() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }
  bool has_params() const { return has_weights() || kind == LayerKind::batchnorm; }

  static LayerSpec dense(std::size_t in, std::size_t out) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.in = in;
    s.out = out;
    return s;
  }
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                          std::size_t stride = 1, std::size_t pad = 0) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.in_ch = in_ch;
    s.out_ch = out_ch;
    s.kernel = kernel;
    s.stride = stride;
    s.pad = pad;
    return s;
  }
  static LayerSpec batchnorm(std::size_t features) {
    LayerSpec s;
    s.kind = LayerKind::batchnorm;
    s.features = features;
    return s;
  }
  static LayerSpec relu() {
    LayerSpec s;
    s.kind = LayerKind::relu;
    return s;
  }
  static LayerSpec flatten() {
    LayerSpec s;
    s.kind = LayerKind::flatten;
    return s;
  }
};

/// Parameters of one layer. For batchnorm, `w` holds gamma and `b` holds
/// beta; running stats are state, not optimized parameters.
template <std::floating_point T>
struct LayerParams {
  Tensor<T> w, b;
  Tensor<T> running_mean, running_var;  // batchnorm only
};

template <std::floating_point T>
struct LayerGrads {
  Tensor<T> w, b;
  bool present = false;
};

template <std::floating_point T>
struct Gradients {
  std::vector<LayerGrads<T>> layers;
};

/// Per-layer inputs (and batch-norm statistics) captured by a training-mode
/// forward pass, consumed by backward().
template <std::floating_point T>
struct ForwardCache {
  std::vector<Tensor<T>> inputs;
  std::vector<BatchNormCache<T>> bn;
  bool valid = false;
};

/// Batch-norm constants; the underlying schemes leave them unstated, so the
/// usual framework defaults are used.
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// A sequential feedforward network: layer specs plus instantiated
/// parameters. All parameters are stored in floating-point precision; these
/// are the shadow (master) copies that receive optimizer updates.
template <std::floating_point T>
class Network {
public:
  std::vector<LayerSpec> spec;
  std::vector<LayerParams<T>> params;

  Network() = default;
  explicit Network(std::vector<LayerSpec> layers) : spec(std::move(layers)) {
    params.resize(spec.size());
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const LayerSpec& l = spec[i];
      switch (l.kind) {
        case LayerKind::dense:
          params[i].w = Tensor<T>({l.out, l.in});
          params[i].b = Tensor<T>({l.out});
          break;
        case LayerKind::conv2d:
          params[i].w = Tensor<T>({l.out_ch, l.in_ch, l.kernel, l.kernel});
          params[i].b = Tensor<T>({l.out_ch});
          break;
        case LayerKind::batchnorm:
          params[i].w = Tensor<T>({l.features}, T(1));
          params[i].b = Tensor<T>({l.features});
          params[i].running_mean = Tensor<T>({l.features});
          params[i].running_var = Tensor<T>({l.features}, T(1));
          break;
        default: break;
      }
    }
  }

  /// Indices (into spec) of weight-bearing layers, in network order.
  std::vector<std::size_t> weight_layers() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (spec[i].has_weights()) idx.push_back(i);
    return idx;
  }

  /// L, the number of weight-bearing layers.
  std::size_t weight_layer_count() const { return weight_layers().size(); }

  /// Total element count of weight matrices/kernels only (biases and
  /// batch-norm parameters excluded).
  std::size_t weight_count() const {
    std::size_t n = 0;
    for (std::size_t i : weight_layers()) n += params[i].w.size();
    return n;
  }

  /// He initialization for dense/conv weights (variance 2/fan_in), zero
  /// biases; batch-norm gain 1, shift 0, running stats (0, 1).
  void init_params(Rng& rng) {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const LayerSpec& l = spec[i];
      if (!l.has_weights()) {
        if (l.kind == LayerKind::batchnorm) {
          params[i].w.fill(T(1));
          params[i].b.fill(T(0));
          params[i].running_mean.fill(T(0));
          params[i].running_var.fill(T(1));
        }
        continue;
      }
      const std::size_t fan_in =
          l.kind == LayerKind::dense ? l.in : l.in_ch * l.kernel * l.kernel;
      const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (T& v : params[i].w.data) v = static_cast<T>(rng.gaussian() * stddev);
      params[i].b.fill(T(0));
    }
  }

  /// Symbolically composes layer shapes from the given input shape; throws
  /// config_error on the first mismatch. Returns the output shape.
  std::vector<std::size_t> validate(std::vector<std::size_t> shape) const {
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const LayerSpec& l = spec[i];
      const std::string where =
          "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
      switch (l.kind) {
        case LayerKind::dense:
          if (shape.size() != 2 || shape[1] != l.in)
            throw config_error(where + ": expected input [*," + std::to_string(l.in) + "], got " +
                               shape_to_string(shape));
          shape = {shape[0], l.out};
          break;
        case LayerKind::conv2d: {
          if (shape.size() != 4 || shape[1] != l.in_ch)
            throw config_error(where + ": expected input [*," + std::to_string(l.in_ch) +
                               ",h,w], got " + shape_to_string(shape));
          const std::size_t oh = conv_out_extent(shape[2], l.kernel, l.stride, l.pad, "height");
          const std::size_t ow = conv_out_extent(shape[3], l.kernel, l.stride, l.pad, "width");
          shape = {shape[0], l.out_ch, oh, ow};
          break;
        }
        case LayerKind::batchnorm:
          if ((shape.size() != 2 && shape.size() != 4) || shape[1] != l.features)
            throw config_error(where + ": expected feature dim " + std::to_string(l.features) +
                               ", got " + shape_to_string(shape));
          break;
        case LayerKind::relu: break;
        case LayerKind::flatten:
          shape = {shape[0], shape_product(shape) / shape[0]};
          break;
      }
    }
    return shape;
  }

  /// Forward pass. `effective_weights`, when given, supplies the per
  /// weight-bearing-layer tensors to use in place of the shadow weights (the
  /// binarization hook); nullptr means plain float forward. A non-null
  /// `cache` records what backward() needs and implies training semantics
  /// for batch norm.
  Tensor<T> forward(const Tensor<T>& x, const std::vector<Tensor<T>>* effective_weights,
                    bool train, ForwardCache<T>* cache, bool update_running = true) {
    if (effective_weights && effective_weights->size() != weight_layer_count())
      throw config_error("forward: got " + std::to_string(effective_weights->size()) +
                         " effective weight tensors for " +
                         std::to_string(weight_layer_count()) + " weight-bearing layers");
    if (cache) {
      cache->inputs.assign(spec.size(), Tensor<T>());
      cache->bn.assign(spec.size(), BatchNormCache<T>());
      cache->valid = true;
    }
    Tensor<T> cur = x;
    std::size_t wi = 0;
    for (std::size_t i = 0; i < spec.size(); ++i) {
      const LayerSpec& l = spec[i];
      if (cache) cache->inputs[i] = cur;
      switch (l.kind) {
        case LayerKind::dense: {
          const Tensor<T>& w = effective_weights ? (*effective_weights)[wi] : params[i].w;
          cur = dense_forward(cur, w, params[i].b);
          ++wi;
          break;
        }
        case LayerKind::conv2d: {
          const Tensor<T>& w = effective_weights ? (*effective_weights)[wi] : params[i].w;
          cur = conv2d_forward(cur, w, params[i].b, l.stride, l.pad);
          ++wi;
          break;
        }
        case LayerKind::batchnorm:
          cur = batchnorm_forward(cur, params[i].w, params[i].b, params[i].running_mean,
                                  params[i].running_var, train, static_cast<T>(kBatchNormEps),
                                  static_cast<T>(kBatchNormMomentum),
                                  cache ? &cache->bn[i] : nullptr, update_running);
          break;
        case LayerKind::relu: cur = relu_forward(cur); break;
        case LayerKind::flatten: cur = flatten_forward(cur); break;
      }
    }
    return cur;
  }

  /// Reverse-mode gradients of the loss w.r.t. every parameter, given the
  /// cache of the matching forward pass and the loss gradient w.r.t. the
  /// network output. `effective_weights` must be whatever forward() used.
  Gradients<T> backward(const ForwardCache<T>& cache,
                        const std::vector<Tensor<T>>* effective_weights,
                        const Tensor<T>& output_grad) const {
    if (!cache.valid || cache.inputs.size() != spec.size())
      throw usage_error("backward called without a prior cached forward pass");
    Gradients<T> grads;
    grads.layers.resize(spec.size());
    Tensor<T> d = output_grad;
    std::size_t wi = weight_layer_count();
    for (std::size_t ri = spec.size(); ri-- > 0;) {
      const LayerSpec& l = spec[ri];
      switch (l.kind) {
        case LayerKind::dense: {
          --wi;
          const Tensor<T>& w = effective_weights ? (*effective_weights)[wi] : params[ri].w;
          Tensor<T> dx;
          dense_backward(cache.inputs[ri], w, d, dx, grads.layers[ri].w, grads.layers[ri].b);
          grads.layers[ri].present = true;
          d = std::move(dx);
          break;
        }
        case LayerKind::conv2d: {
          --wi;
          const Tensor<T>& w = effective_weights ? (*effective_weights)[wi] : params[ri].w;
          Tensor<T> dx;
          conv2d_backward(cache.inputs[ri], w, d, l.stride, l.pad, dx, grads.layers[ri].w,
                          grads.layers[ri].b);
          grads.layers[ri].present = true;
          d = std::move(dx);
          break;
        }
        case LayerKind::batchnorm: {
          Tensor<T> dx;
          batchnorm_backward(cache.bn[ri], params[ri].w, d, dx, grads.layers[ri].w,
                             grads.layers[ri].b);
          grads.layers[ri].present = true;
          d = std::move(dx);
          break;
        }
        case LayerKind::relu: d = relu_backward(cache.inputs[ri], d); break;
        case LayerKind::flatten: d = flatten_backward(cache.inputs[ri].shape, d); break;
      }
    }
    return grads;
  }

  template <std::floating_point U>
  Network<U> cast() const {
    Network<U> out;
    out.spec = spec;
    out.params.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.params[i].w = params[i].w.template cast<U>();
      out.params[i].b = params[i].b.template cast<U>();
      out.params[i].running_mean = params[i].running_mean.template cast<U>();
      out.params[i].running_var = params[i].running_var.template cast<U>();
    }
    return out;
  }
};

/// Builds the standard block structure for a fully connected classifier:
/// dense -> batchnorm -> relu per hidden layer, final dense feeding softmax
/// directly.
inline std::vector<LayerSpec> mlp_spec(std::size_t input_dim,
                                       const std::vector<std::size_t>& layer_sizes) {
  if (layer_sizes.empty()) throw config_error("mlp_spec: need at least one layer size");
  std::vector<LayerSpec> spec;
  std::size_t in = input_dim;
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    spec.push_back(LayerSpec::dense(in, layer_sizes[i]));
    if (i + 1 < layer_sizes.size()) {
      spec.push_back(LayerSpec::batchnorm(layer_sizes[i]));
      spec.push_back(LayerSpec::relu());
    }
    in = layer_sizes[i];
  }
  return spec;
}

}  // namespace bwn
