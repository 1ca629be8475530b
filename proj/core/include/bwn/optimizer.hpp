#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "bwn/errors.hpp"
#include "bwn/network.hpp"

namespace bwn {

enum class OptimizerKind { adam, sgd_momentum };

inline const char* optimizer_kind_name(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

inline OptimizerKind optimizer_kind_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd" || name == "sgd_momentum") return OptimizerKind::sgd_momentum;
  throw config_error("unknown optimizer '" + name + "' (expected adam or sgd)");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam
  double momentum = 0.9, weight_decay = 1e-4;     // sgd
};

/// Adam (with bias correction) or SGD with momentum and L2 weight decay.
/// Moment buffers mirror parameter shapes exactly; updates apply to the
/// network's shadow parameters only. The learning rate is a single scalar
/// passed per step; there is no per-layer scaling anywhere.
template <std::floating_point T>
class Optimizer {
public:
  Optimizer() = default;
  Optimizer(OptimizerConfig cfg, const Network<T>& net) : cfg_(cfg) {
    slots_.resize(net.spec.size());
    for (std::size_t i = 0; i < net.spec.size(); ++i) {
      if (!net.spec[i].has_params()) continue;
      slots_[i].m_w = Tensor<T>(net.params[i].w.shape);
      slots_[i].m_b = Tensor<T>(net.params[i].b.shape);
      if (cfg_.kind == OptimizerKind::adam) {
        slots_[i].v_w = Tensor<T>(net.params[i].w.shape);
        slots_[i].v_b = Tensor<T>(net.params[i].b.shape);
      }
      slots_[i].present = true;
    }
  }

  const OptimizerConfig& config() const { return cfg_; }
  long step_count() const { return steps_; }

  void step(Network<T>& net, const Gradients<T>& grads, double lr) {
    if (grads.layers.size() != net.spec.size())
      throw config_error("optimizer step: gradient layer count mismatch");
    ++steps_;
    for (std::size_t i = 0; i < net.spec.size(); ++i) {
      if (!slots_[i].present || !grads.layers[i].present) continue;
      apply(net.params[i].w, grads.layers[i].w, slots_[i].m_w, slots_[i].v_w, lr);
      apply(net.params[i].b, grads.layers[i].b, slots_[i].m_b, slots_[i].v_b, lr);
    }
  }

private:
  struct Slot {
    Tensor<T> m_w, v_w, m_b, v_b;
    bool present = false;
  };

  void apply(Tensor<T>& p, const Tensor<T>& g, Tensor<T>& m, Tensor<T>& v, double lr) {
    if (!p.same_shape(g))
      throw config_error("optimizer step: gradient shape " + shape_to_string(g.shape) +
                         " does not match parameter shape " + shape_to_string(p.shape));
    const T lrt = static_cast<T>(lr);
    if (cfg_.kind == OptimizerKind::adam) {
      const T b1 = static_cast<T>(cfg_.beta1), b2 = static_cast<T>(cfg_.beta2);
      const T eps = static_cast<T>(cfg_.eps);
      const T c1 = T(1) - static_cast<T>(std::pow(cfg_.beta1, static_cast<double>(steps_)));
      const T c2 = T(1) - static_cast<T>(std::pow(cfg_.beta2, static_cast<double>(steps_)));
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T mhat = m[i] / c1;
        const T vhat = v[i] / c2;
        p[i] -= lrt * mhat / (std::sqrt(vhat) + eps);
      }
    } else {
      const T mu = static_cast<T>(cfg_.momentum);
      const T wd = static_cast<T>(cfg_.weight_decay);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const T gd = g[i] + wd * p[i];
        m[i] = mu * m[i] + gd;
        p[i] -= lrt * m[i];
      }
    }
  }

  OptimizerConfig cfg_;
  std::vector<Slot> slots_;
  long steps_ = 0;
};

}  // namespace bwn
