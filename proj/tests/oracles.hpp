#pragma once

// Independent oracles the test suites check the library against. Everything
// here is deliberately written in plain loops over raw doubles, with no reuse
// of the library's own kernels.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "relic/tensor.hpp"

namespace oracle {

// Central finite differences over every element of every parameter tensor.
// `loss` must rebuild its graph from scratch on each call (fresh tape) so the
// evaluation is a pure function of the parameter values.
//
// Relative error metric: |g - fd| / max(1, |g|, |fd|), i.e. relative for
// large gradients and absolute below 1. eps = 1e-5 unless stated otherwise.
struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t n_checked = 0;
};

inline GradCheckResult check_gradients(const std::function<double()>& loss,
                                       const std::function<void()>& backward_fill,
                                       std::vector<relic::Tensor> params,
                                       double eps = 1e-5) {
  for (auto& p : params) p.zero_grad();
  backward_fill();
  GradCheckResult res;
  for (auto& p : params) {
    auto vals = p.value();
    auto grads = p.grad();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      vals[i] = keep + eps;
      const double f_plus = loss();
      vals[i] = keep - eps;
      const double f_minus = loss();
      vals[i] = keep;
      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double g = grads[i];
      const double rel = std::fabs(g - fd) / std::max({1.0, std::fabs(g), std::fabs(fd)});
      res.max_rel_err = std::max(res.max_rel_err, rel);
      ++res.n_checked;
    }
  }
  return res;
}

// log softmax in extended precision for a single row.
inline std::vector<double> log_softmax_ld(std::span<const double> x) {
  long double mx = x[0];
  for (double v : x) mx = std::max<long double>(mx, v);
  long double z = 0.0L;
  for (double v : x) z += expl((long double)v - mx);
  const long double lse = mx + logl(z);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (double)((long double)x[i] - lse);
  return out;
}

// Plain softmax of <anchor, candidate>/tau similarities; candidates row-major.
inline std::vector<double> contrastive_probs(std::span<const double> anchor,
                                             const std::vector<std::vector<double>>& candidates,
                                             double tau) {
  std::vector<double> logits(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    double dot = 0.0;
    for (std::size_t j = 0; j < anchor.size(); ++j) dot += anchor[j] * candidates[c][j];
    logits[c] = dot / tau;
  }
  double z = 0.0;
  std::vector<double> probs(logits.size());
  for (double l : logits) z += std::exp(l);
  for (std::size_t c = 0; c < logits.size(); ++c) probs[c] = std::exp(logits[c]) / z;
  return probs;
}

// Direct summation KL(p || q) for already-normalized probability vectors.
inline double kl_direct(std::span<const double> p, std::span<const double> q) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * (std::log(p[i]) - std::log(q[i]));
  return acc;
}

}  // namespace oracle
