#include "relic/optim.hpp"

#include <cmath>
#include <numbers>
#include <span>

#include "relic/errors.hpp"

namespace relic {

double cosine_lr(uint64_t step, const ScheduleConfig& cfg) {
  if (cfg.warmup_steps > cfg.total_steps)
    throw ConfigError("cosine_lr: warmup_steps must not exceed total_steps");
  if (!(cfg.base_lr >= 0.0)) throw ConfigError("cosine_lr: base_lr must be non-negative");
  if (step > cfg.total_steps) return 0.0;
  if (step < cfg.warmup_steps)
    return cfg.base_lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  const auto span = cfg.total_steps - cfg.warmup_steps;
  const double progress =
      span == 0 ? 0.0 : static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(span);
  return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

void check_grads_finite(const std::vector<ParamRef>& params, const char* who) {
  for (const auto& p : params) {
    const auto g = p.tensor.grad_or_empty();
    for (double v : g)
      if (!std::isfinite(v)) throw NumericError(std::string(who) + ": non-finite gradient");
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

void OptState::ensure(const std::vector<ParamRef>& params) {
  if (momentum.size() == params.size()) return;
  if (!momentum.empty()) throw ContractError("OptState: parameter count changed mid-run");
  momentum.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    momentum[i].assign(params[i].tensor.value().size(), 0.0);
}

void lars_step(std::vector<ParamRef>& params, double lr, const LarsConfig& cfg, OptState& state) {
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw ConfigError("lars_step: momentum must lie in [0, 1)");
  if (!(cfg.trust_coefficient > 0.0))
    throw ConfigError("lars_step: trust_coefficient must be positive");
  if (!(lr >= 0.0)) throw ConfigError("lars_step: learning rate must be non-negative");
  check_grads_finite(params, "lars_step");
  state.ensure(params);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].tensor.value();
    const auto grad = params[i].tensor.grad_or_empty();
    auto& m = state.momentum[i];
    if (grad.empty()) continue;  // parameter untouched by this loss
    if (grad.size() != value.size() || m.size() != value.size())
      throw ContractError("lars_step: gradient/buffer size mismatch");

    const bool excluded = params[i].is_bias;
    std::vector<double> adjusted(grad.begin(), grad.end());
    if (!excluded && cfg.weight_decay != 0.0)
      for (std::size_t j = 0; j < adjusted.size(); ++j) adjusted[j] += cfg.weight_decay * value[j];

    double ratio = 1.0;
    if (!excluded) {
      const double pn = l2_norm(value), gn = l2_norm(adjusted);
      if (pn > 0.0 && gn > 0.0) {
        ratio = cfg.trust_coefficient * pn / (gn + 1e-9);
        if (!std::isfinite(ratio)) ratio = 1.0;
      }
    }
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = cfg.momentum * m[j] + ratio * lr * adjusted[j];
      value[j] -= m[j];
    }
  }
}

void sgd_nesterov_step(std::vector<ParamRef>& params, double lr, double momentum,
                       OptState& state) {
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw ConfigError("sgd_nesterov_step: momentum must lie in [0, 1)");
  if (!(lr >= 0.0)) throw ConfigError("sgd_nesterov_step: learning rate must be non-negative");
  check_grads_finite(params, "sgd_nesterov_step");
  state.ensure(params);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto value = params[i].tensor.value();
    const auto grad = params[i].tensor.grad_or_empty();
    auto& m = state.momentum[i];
    if (grad.empty()) continue;
    if (grad.size() != value.size() || m.size() != value.size())
      throw ContractError("sgd_nesterov_step: gradient/buffer size mismatch");
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = momentum * m[j] + grad[j];
      value[j] -= lr * (grad[j] + momentum * m[j]);
    }
  }
}

}  // namespace relic
