#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bwn/errors.hpp"
#include "bwn/network.hpp"
#include "bwn/tensor.hpp"

namespace bwn {

/// Per weight-bearing-layer flags; flag i true means layer i forward-
/// propagates with binarized weights. Layers are numbered 1..L in network
/// order throughout.
struct BinarizationState {
  std::vector<std::uint8_t> flags;

  BinarizationState() = default;
  explicit BinarizationState(std::size_t layer_count) : flags(layer_count, 0) {}

  static BinarizationState none(std::size_t layer_count) {
    return BinarizationState(layer_count);
  }
  static BinarizationState all(std::size_t layer_count) {
    BinarizationState s(layer_count);
    for (auto& f : s.flags) f = 1;
    return s;
  }
  static BinarizationState onehot(std::size_t layer_count, std::size_t layer /*1-based*/) {
    BinarizationState s(layer_count);
    s.set(layer);
    return s;
  }

  std::size_t layer_count() const { return flags.size(); }
  bool get(std::size_t layer /*1-based*/) const { return flags.at(layer - 1) != 0; }
  void set(std::size_t layer /*1-based*/, bool on = true) { flags.at(layer - 1) = on ? 1 : 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto f : flags) n += f ? 1 : 0;
    return n;
  }
  bool all_set() const { return count() == flags.size(); }
  bool none_set() const { return count() == 0; }

  /// e.g. "100" after the first layer of a 3-layer network is flagged.
  std::string bitstring() const {
    std::string s(flags.size(), '0');
    for (std::size_t i = 0; i < flags.size(); ++i)
      if (flags[i]) s[i] = '1';
    return s;
  }

  bool operator==(const BinarizationState&) const = default;
};

/// Elementwise sign to {-1, +1}; sign(0) = +1 (fixed tie-break for
/// determinism).
template <std::floating_point T>
Tensor<T> binarize_sign(const Tensor<T>& w) {
  Tensor<T> out(w.shape);
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = w[i] < T(0) ? T(-1) : T(1);
  return out;
}

/// The residual w - sign(w). Returned in double precision so that
/// binarize_sign(w) + quantization_error(w) reconstructs w exactly for every
/// reachable float weight; a same-precision subtraction loses that identity
/// to rounding.
template <std::floating_point T>
Tensor<double> quantization_error(const Tensor<T>& w) {
  Tensor<double> out;
  out.shape = w.shape;
  out.data.resize(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double wi = static_cast<double>(w[i]);
    out.data[i] = wi - (wi < 0.0 ? -1.0 : 1.0);
  }
  return out;
}

/// Effective weights for the forward pass: flagged layers get sign(shadow),
/// unflagged layers an identical copy of the shadow. Shadow tensors are
/// never touched.
template <std::floating_point T>
void apply_binarization_into(const Network<T>& net, const BinarizationState& state,
                             std::vector<Tensor<T>>& effective) {
  const std::vector<std::size_t> wl = net.weight_layers();
  if (state.layer_count() != wl.size())
    throw config_error("apply_binarization: state has " + std::to_string(state.layer_count()) +
                       " flags but network has " + std::to_string(wl.size()) +
                       " weight-bearing layers");
  effective.resize(wl.size());
  for (std::size_t i = 0; i < wl.size(); ++i) {
    const Tensor<T>& shadow = net.params[wl[i]].w;
    if (state.flags[i]) {
      effective[i] = binarize_sign(shadow);
    } else {
      effective[i] = shadow;
    }
  }
}

template <std::floating_point T>
std::vector<Tensor<T>> apply_binarization(const Network<T>& net, const BinarizationState& state) {
  std::vector<Tensor<T>> effective;
  apply_binarization_into(net, state, effective);
  return effective;
}

/// Straight-through estimator: gradients computed w.r.t. the effective
/// (possibly binarized) weights pass through unchanged as gradients for the
/// shadow weights, which are what the optimizer updates.
template <std::floating_point T>
Gradients<T>& ste_route_gradients(Gradients<T>& grads_wrt_effective) {
  return grads_wrt_effective;
}

}  // namespace bwn
