#pragma once

#include <cstddef>
#include <vector>

#include "bwn/layers.hpp"
#include "bwn/network.hpp"

namespace bwn {

/// Identifies one parameter tensor of a network.
struct ParamRef {
  std::size_t layer = 0;
  bool bias = false;  // false: weight/gamma, true: bias/beta
};

inline std::vector<ParamRef> enumerate_params(const std::vector<LayerSpec>& spec) {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < spec.size(); ++i)
    if (spec[i].has_params()) {
      refs.push_back({i, false});
      refs.push_back({i, true});
    }
  return refs;
}

/// Softmax cross-entropy loss of a plain (non-binarized) forward pass.
/// Batch-norm runs in train mode without updating running stats, so probing
/// the loss never mutates the network.
template <std::floating_point T>
double net_loss(Network<T>& net, const Tensor<T>& x, const std::vector<int>& labels) {
  Tensor<T> logits = net.forward(x, nullptr, /*train=*/true, nullptr, /*update_running=*/false);
  return softmax_cross_entropy(logits, labels).loss;
}

/// Central-difference gradient estimate for every element of one parameter
/// tensor: (loss(p+h) - loss(p-h)) / 2h. Runs in whatever precision the
/// network carries; instantiate with double to isolate scheme error from
/// float truncation.
template <std::floating_point T>
Tensor<T> finite_diff_grad(Network<T>& net, const Tensor<T>& x, const std::vector<int>& labels,
                           ParamRef ref, T h) {
  if (!(h > T(0))) throw config_error("finite_diff_grad: step size must be positive");
  Tensor<T>& p = ref.bias ? net.params[ref.layer].b : net.params[ref.layer].w;
  Tensor<T> grad(p.shape);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T saved = p[i];
    p[i] = saved + h;
    const double up = net_loss(net, x, labels);
    p[i] = saved - h;
    const double down = net_loss(net, x, labels);
    p[i] = saved;
    grad[i] = static_cast<T>((up - down) / (2.0 * static_cast<double>(h)));
  }
  return grad;
}

/// Same estimate for a single element; used to spot-check large tensors.
template <std::floating_point T>
T finite_diff_element(Network<T>& net, const Tensor<T>& x, const std::vector<int>& labels,
                      ParamRef ref, std::size_t index, T h) {
  Tensor<T>& p = ref.bias ? net.params[ref.layer].b : net.params[ref.layer].w;
  const T saved = p[index];
  p[index] = saved + h;
  const double up = net_loss(net, x, labels);
  p[index] = saved - h;
  const double down = net_loss(net, x, labels);
  p[index] = saved;
  return static_cast<T>((up - down) / (2.0 * static_cast<double>(h)));
}

/// abs/rel closeness used by the gradient checks.
inline bool close_rel(double a, double b, double rtol, double atol) {
  const double diff = std::abs(a - b);
  return diff <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

}  // namespace bwn
