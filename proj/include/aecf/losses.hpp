#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "aecf/tape.hpp"
#include "aecf/tensor.hpp"

namespace aecf {

namespace detail {

inline double sign0(double r) { return r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

// Huber loss on squared residuals: with y_ij = (x_ij - xhat_ij)^2,
//   L = (1/M) * sum_ij [ 0.5*y/beta           if sqrt(y) < beta
//                        sqrt(y) - 0.5*beta   otherwise ]
// The two branches meet at sqrt(y) == beta, so L is continuous and
// differentiable everywhere.
inline double huber_loss(const Tensor& x, const Tensor& xhat, double beta = 1.0) {
  ensure_same_shape(x, xhat, "huber_loss");
  if (!(beta > 0.0)) throw ConfigError("huber_loss: beta must be positive");
  const std::size_t M = x.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double r = x[i] - xhat[i];
    const double a = std::fabs(r);
    acc += a < beta ? 0.5 * r * r / beta : a - 0.5 * beta;
  }
  return acc / static_cast<double>(M);
}

// Anomaly score: AS = MSE + MAE over all elements. The MAE subgradient at a
// zero residual is taken as 0.
inline double anomaly_score(const Tensor& x, const Tensor& xhat) {
  ensure_same_shape(x, xhat, "anomaly_score");
  const std::size_t M = x.size();
  double sq = 0.0, ab = 0.0;
  for (std::size_t i = 0; i < M; ++i) {
    const double r = x[i] - xhat[i];
    sq += r * r;
    ab += std::fabs(r);
  }
  return sq / static_cast<double>(M) + ab / static_cast<double>(M);
}

// Elementwise score matrix: ASW = (x - xhat)^2 + |x - xhat|, no averaging.
// mean(ASW) equals anomaly_score on the same pair.
inline Tensor anomaly_score_window(const Tensor& x, const Tensor& xhat) {
  ensure_same_shape(x, xhat, "anomaly_score_window");
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - xhat[i];
    out[i] = r * r + std::fabs(r);
  }
  return out;
}

// Traced Huber loss. Gradient per element:
//   |r| <  beta:  dL/dx = r/(M*beta)
//   |r| >= beta:  dL/dx = sign(r)/M
// (and the negative for xhat). The branches agree at |r| == beta.
inline Traced huber_loss_t(Tape* tape, const Traced& x, const Traced& xhat, double beta = 1.0) {
  Tensor out = Tensor::scalar(huber_loss(x.value, xhat.value, beta));
  if (!tape || (!x.on_tape() && !xhat.on_tape())) return Traced(std::move(out));

  std::vector<int> parents;
  if (x.on_tape()) parents.push_back(x.id);
  if (xhat.on_tape()) parents.push_back(xhat.id);
  const bool want_dx = x.on_tape();
  const bool want_dh = xhat.on_tape();
  Tensor xv = x.value, hv = xhat.value;
  return tape->record(std::move(out), std::move(parents), [=](const Tensor& up) {
    const std::size_t M = xv.size();
    Tensor g(xv.shape());
    const double scale = up[0] / static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
      const double r = xv[i] - hv[i];
      g[i] = scale * (std::fabs(r) < beta ? r / beta : detail::sign0(r));
    }
    std::vector<Tensor> grads;
    if (want_dx) grads.push_back(g);
    if (want_dh) {
      for (auto& v : g.data()) v = -v;
      grads.push_back(std::move(g));
    }
    return grads;
  });
}

// Traced anomaly score. dAS/dx = (2r + sign(r))/M with r = x - xhat;
// dAS/dxhat is the negative.
inline Traced anomaly_score_t(Tape* tape, const Traced& x, const Traced& xhat) {
  Tensor out = Tensor::scalar(anomaly_score(x.value, xhat.value));
  if (!tape || (!x.on_tape() && !xhat.on_tape())) return Traced(std::move(out));

  std::vector<int> parents;
  if (x.on_tape()) parents.push_back(x.id);
  if (xhat.on_tape()) parents.push_back(xhat.id);
  const bool want_dx = x.on_tape();
  const bool want_dh = xhat.on_tape();
  Tensor xv = x.value, hv = xhat.value;
  return tape->record(std::move(out), std::move(parents), [=](const Tensor& up) {
    const std::size_t M = xv.size();
    Tensor g(xv.shape());
    const double scale = up[0] / static_cast<double>(M);
    for (std::size_t i = 0; i < M; ++i) {
      const double r = xv[i] - hv[i];
      g[i] = scale * (2.0 * r + detail::sign0(r));
    }
    std::vector<Tensor> grads;
    if (want_dx) grads.push_back(g);
    if (want_dh) {
      for (auto& v : g.data()) v = -v;
      grads.push_back(std::move(g));
    }
    return grads;
  });
}

}  // namespace aecf
