#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bwn/errors.hpp"
#include "bwn/tensor.hpp"

namespace bwn {

namespace detail {
template <std::floating_point T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <std::floating_point T>
using CMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <std::floating_point T>
using CVecMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
}  // namespace detail

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// y[n,o] = sum_i W[o,i] * x[n,i] + b[o]
template <std::floating_point T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2)
    throw config_error("dense_forward: expected rank-2 input " + shape_to_string(x.shape) +
                       " and weight " + shape_to_string(w.shape));
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (w.dim(1) != in || b.size() != out)
    throw config_error("dense_forward: shapes do not conform: x=" + shape_to_string(x.shape) +
                       " W=" + shape_to_string(w.shape) + " b=" + shape_to_string(b.shape));
  Tensor<T> y({batch, out});
  detail::CMatMap<T> xm(x.ptr(), batch, in);
  detail::CMatMap<T> wm(w.ptr(), out, in);
  detail::MatMap<T> ym(y.ptr(), batch, out);
  ym.noalias() = xm * wm.transpose();
  ym.rowwise() += detail::CVecMap<T>(b.ptr(), out).transpose();
  return y;
}

/// Gradients of the dense map w.r.t. input, the weights used in forward, and bias.
template <std::floating_point T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy, Tensor<T>& dx,
                    Tensor<T>& dw, Tensor<T>& db) {
  const std::size_t batch = x.dim(0), in = x.dim(1), out = w.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != batch || dy.dim(1) != out)
    throw config_error("dense_backward: upstream gradient shape " + shape_to_string(dy.shape) +
                       " does not match output [" + std::to_string(batch) + "," +
                       std::to_string(out) + "]");
  dx = Tensor<T>({batch, in});
  dw = Tensor<T>({out, in});
  db = Tensor<T>({out});
  detail::CMatMap<T> xm(x.ptr(), batch, in);
  detail::CMatMap<T> wm(w.ptr(), out, in);
  detail::CMatMap<T> dym(dy.ptr(), batch, out);
  detail::MatMap<T> dxm(dx.ptr(), batch, in);
  detail::MatMap<T> dwm(dw.ptr(), out, in);
  dxm.noalias() = dym * wm;
  dwm.noalias() = dym.transpose() * xm;
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(db.ptr(), out) = dym.colwise().sum();
}

// ---------------------------------------------------------------------------
// Conv2d (cross-correlation with zero padding)
// ---------------------------------------------------------------------------

inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                                   std::size_t pad, const char* axis) {
  const std::size_t padded = in + 2 * pad;
  if (padded < kernel || (padded - kernel) % stride != 0)
    throw config_error(std::string("conv2d: non-integral output size along ") + axis);
  return (padded - kernel) / stride + 1;
}

template <std::floating_point T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& b,
                         std::size_t stride, std::size_t pad) {
  if (x.rank() != 4 || k.rank() != 4)
    throw config_error("conv2d_forward: expected rank-4 input and kernel, got " +
                       shape_to_string(x.shape) + " and " + shape_to_string(k.shape));
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  if (k.dim(1) != cin || b.size() != cout)
    throw config_error("conv2d_forward: shapes do not conform: x=" + shape_to_string(x.shape) +
                       " K=" + shape_to_string(k.shape));
  const std::size_t oh = conv_out_extent(h, kh, stride, pad, "height");
  const std::size_t ow = conv_out_extent(w, kw, stride, pad, "width");
  Tensor<T> y({batch, cout, oh, ow});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t oc = 0; oc < cout; ++oc)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          T acc = b[oc];
          for (std::size_t ic = 0; ic < cin; ++ic)
            for (std::size_t r = 0; r < kh; ++r) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(i * stride + r) - static_cast<std::ptrdiff_t>(pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t c = 0; c < kw; ++c) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(j * stride + c) - static_cast<std::ptrdiff_t>(pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                acc += k.at4(oc, ic, r, c) *
                       x.at4(n, ic, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw));
              }
            }
          y.at4(n, oc, i, j) = acc;
        }
  return y;
}

template <std::floating_point T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& k, const Tensor<T>& dy,
                     std::size_t stride, std::size_t pad, Tensor<T>& dx, Tensor<T>& dk,
                     Tensor<T>& db) {
  const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = dy.dim(2), ow = dy.dim(3);
  dx = Tensor<T>(x.shape);
  dk = Tensor<T>(k.shape);
  db = Tensor<T>({cout});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t oc = 0; oc < cout; ++oc)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const T g = dy.at4(n, oc, i, j);
          db[oc] += g;
          for (std::size_t ic = 0; ic < cin; ++ic)
            for (std::size_t r = 0; r < kh; ++r) {
              const std::ptrdiff_t ih =
                  static_cast<std::ptrdiff_t>(i * stride + r) - static_cast<std::ptrdiff_t>(pad);
              if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
              for (std::size_t c = 0; c < kw; ++c) {
                const std::ptrdiff_t iw =
                    static_cast<std::ptrdiff_t>(j * stride + c) - static_cast<std::ptrdiff_t>(pad);
                if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                const std::size_t ihs = static_cast<std::size_t>(ih);
                const std::size_t iws = static_cast<std::size_t>(iw);
                dk.at4(oc, ic, r, c) += g * x.at4(n, ic, ihs, iws);
                dx.at4(n, ic, ihs, iws) += g * k.at4(oc, ic, r, c);
              }
            }
        }
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Cached forward quantities needed by the backward pass.
template <std::floating_point T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;  // per feature
  std::size_t rows = 0;    // normalization count per feature
};

namespace detail {
// Feature axis is dim 1 for both [N,F] and [N,C,H,W] inputs; `rows` is the
// number of values normalized per feature.
struct BnLayout {
  std::size_t features, rows, inner;
};
inline BnLayout bn_layout(const std::vector<std::size_t>& shape) {
  if (shape.size() == 2) return {shape[1], shape[0], 1};
  if (shape.size() == 4) return {shape[1], shape[0] * shape[2] * shape[3], shape[2] * shape[3]};
  throw config_error("batchnorm: expected rank-2 or rank-4 input, got " + shape_to_string(shape));
}
template <std::floating_point T, typename Fn>
void bn_for_each(const std::vector<std::size_t>& shape, std::size_t f, Fn&& fn) {
  const BnLayout l = bn_layout(shape);
  if (shape.size() == 2) {
    for (std::size_t n = 0; n < shape[0]; ++n) fn(n * l.features + f);
  } else {
    for (std::size_t n = 0; n < shape[0]; ++n) {
      const std::size_t base = (n * l.features + f) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) fn(base + i);
    }
  }
}
}  // namespace detail

/// Train mode normalizes by batch statistics (biased variance) and updates
/// running stats by exponential moving average (unbiased variance, matching
/// the usual framework convention). Eval mode uses the running stats.
/// `update_running` exists so loss probes can evaluate train-mode output
/// without mutating state.
template <std::floating_point T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& running_mean, Tensor<T>& running_var, bool train, T eps,
                            T momentum, BatchNormCache<T>* cache, bool update_running = true) {
  const detail::BnLayout l = detail::bn_layout(x.shape);
  if (gamma.size() != l.features || beta.size() != l.features)
    throw config_error("batchnorm: feature dimension " + std::to_string(l.features) +
                       " does not match gamma/beta length " + std::to_string(gamma.size()));
  Tensor<T> y(x.shape);
  if (!train) {
    for (std::size_t f = 0; f < l.features; ++f) {
      const T inv = T(1) / std::sqrt(running_var[f] + eps);
      detail::bn_for_each<T>(x.shape, f,
                             [&](std::size_t i) { y[i] = (x[i] - running_mean[f]) * inv * gamma[f] + beta[f]; });
    }
    return y;
  }
  if (l.rows < 2)
    throw data_error("batchnorm: train mode needs at least 2 values per feature, got " +
                     std::to_string(l.rows));
  if (cache) {
    cache->xhat = Tensor<T>(x.shape);
    cache->inv_std.assign(l.features, T(0));
    cache->rows = l.rows;
  }
  for (std::size_t f = 0; f < l.features; ++f) {
    double sum = 0, sq = 0;
    detail::bn_for_each<T>(x.shape, f, [&](std::size_t i) { sum += x[i]; });
    const T mean = static_cast<T>(sum / static_cast<double>(l.rows));
    detail::bn_for_each<T>(x.shape, f, [&](std::size_t i) {
      const double d = static_cast<double>(x[i]) - static_cast<double>(mean);
      sq += d * d;
    });
    const T var = static_cast<T>(sq / static_cast<double>(l.rows));
    const T inv = T(1) / std::sqrt(var + eps);
    detail::bn_for_each<T>(x.shape, f, [&](std::size_t i) {
      const T xh = (x[i] - mean) * inv;
      if (cache) cache->xhat[i] = xh;
      y[i] = xh * gamma[f] + beta[f];
    });
    if (cache) cache->inv_std[f] = inv;
    if (update_running) {
      const T unbiased = var * static_cast<T>(l.rows) / static_cast<T>(l.rows - 1);
      running_mean[f] = (T(1) - momentum) * running_mean[f] + momentum * mean;
      running_var[f] = (T(1) - momentum) * running_var[f] + momentum * unbiased;
    }
  }
  return y;
}

template <std::floating_point T>
void batchnorm_backward(const BatchNormCache<T>& cache, const Tensor<T>& gamma, const Tensor<T>& dy,
                        Tensor<T>& dx, Tensor<T>& dgamma, Tensor<T>& dbeta) {
  if (cache.rows == 0) throw usage_error("batchnorm_backward called before a train-mode forward");
  const detail::BnLayout l = detail::bn_layout(dy.shape);
  dx = Tensor<T>(dy.shape);
  dgamma = Tensor<T>({l.features});
  dbeta = Tensor<T>({l.features});
  const T m = static_cast<T>(cache.rows);
  for (std::size_t f = 0; f < l.features; ++f) {
    double sg = 0, sb = 0;
    detail::bn_for_each<T>(dy.shape, f, [&](std::size_t i) {
      sg += static_cast<double>(dy[i]) * static_cast<double>(cache.xhat[i]);
      sb += dy[i];
    });
    dgamma[f] = static_cast<T>(sg);
    dbeta[f] = static_cast<T>(sb);
    const T scale = gamma[f] * cache.inv_std[f] / m;
    detail::bn_for_each<T>(dy.shape, f, [&](std::size_t i) {
      dx[i] = scale * (m * dy[i] - dbeta[f] - cache.xhat[i] * dgamma[f]);
    });
  }
}

// ---------------------------------------------------------------------------
// ReLU / Flatten
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  return y;
}

template <std::floating_point T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& dy) {
  Tensor<T> dx(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  return dx;
}

template <std::floating_point T>
Tensor<T> flatten_forward(const Tensor<T>& x) {
  Tensor<T> y = x;
  y.shape = {x.dim(0), x.size() / x.dim(0)};
  return y;
}

template <std::floating_point T>
Tensor<T> flatten_backward(const std::vector<std::size_t>& input_shape, const Tensor<T>& dy) {
  Tensor<T> dx = dy;
  dx.shape = input_shape;
  return dx;
}

// ---------------------------------------------------------------------------
// Softmax cross-entropy
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct LossGrad {
  double loss = 0;
  Tensor<T> dlogits;
};

/// Mean negative log-softmax of the true class, stabilized by max
/// subtraction; dlogits = (softmax - onehot) / batch.
template <std::floating_point T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw config_error("softmax_cross_entropy: expected rank-2 logits, got " +
                       shape_to_string(logits.shape));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch)
    throw config_error("softmax_cross_entropy: got " + std::to_string(labels.size()) +
                       " labels for batch " + std::to_string(batch));
  LossGrad<T> out;
  out.dlogits = Tensor<T>({batch, classes});
  double total = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes)
      throw data_error("softmax_cross_entropy: label " + std::to_string(label) +
                       " out of range [0," + std::to_string(classes) + ") at row " +
                       std::to_string(n));
    T zmax = logits.at2(n, 0);
    for (std::size_t c = 1; c < classes; ++c) zmax = std::max(zmax, logits.at2(n, c));
    double denom = 0;
    for (std::size_t c = 0; c < classes; ++c)
      denom += std::exp(static_cast<double>(logits.at2(n, c) - zmax));
    total += std::log(denom) - static_cast<double>(logits.at2(n, label) - zmax);
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(static_cast<double>(logits.at2(n, c) - zmax)) / denom;
      out.dlogits.at2(n, c) =
          static_cast<T>((p - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) /
                         static_cast<double>(batch));
    }
  }
  out.loss = total / static_cast<double>(batch);
  return out;
}

}  // namespace bwn
