#pragma once

#include <cstdint>
#include <vector>

#include "relic/nn.hpp"

namespace relic {

// Learning-rate schedule: linear ramp 0 -> base_lr over warmup_steps, then
// cosine decay to 0 at total_steps (no restarts).
struct ScheduleConfig {
  double base_lr = 0.15;  // 0.3 scaled by batch/256 at the default batch size
  uint64_t total_steps = 0;
  uint64_t warmup_steps = 0;
  std::size_t batch_size = 128;

  bool operator==(const ScheduleConfig&) const = default;
};

// Steps past total_steps clamp to the final value 0.
double cosine_lr(uint64_t step, const ScheduleConfig& cfg);

// Layer-wise adaptive rate scaling. Parameters flagged as biases skip both
// weight decay and the trust ratio.
struct LarsConfig {
  double momentum = 0.9;          // in [0, 1)
  double weight_decay = 1.5e-6;
  double trust_coefficient = 1e-3;  // > 0

  bool operator==(const LarsConfig&) const = default;
};

// Per-parameter momentum buffers, allocated on first use. The flat layout is
// what checkpoints serialize.
struct OptState {
  std::vector<std::vector<double>> momentum;

  void ensure(const std::vector<ParamRef>& params);
};

// One optimizer step over `params`, consuming the gradients stored on the
// tensors. Per parameter: g' = grad + weight_decay * param (skipped for
// biases); trust ratio r = trust_coefficient * ||param|| / (||g'|| + 1e-9),
// replaced by 1 for biases, zero norms, or a non-finite ratio; then
// m <- momentum * m + r * lr * g' and param <- param - m.
// A non-finite gradient anywhere aborts before any parameter changes.
void lars_step(std::vector<ParamRef>& params, double lr, const LarsConfig& cfg, OptState& state);

// Nesterov-momentum SGD used by linear probes:
// m <- momentum * m + grad; param <- param - lr * (grad + momentum * m).
void sgd_nesterov_step(std::vector<ParamRef>& params, double lr, double momentum, OptState& state);

}  // namespace relic
