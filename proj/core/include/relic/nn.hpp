#pragma once

#include <cstdint>
#include <vector>

#include "relic/tensor.hpp"

namespace relic {

// Layer widths including input and output, e.g. {32, 256, 256, 64}.
struct MlpSpec {
  std::vector<std::size_t> widths;

  bool operator==(const MlpSpec&) const = default;
};

// Plain MLP: relu between layers, linear last layer. Parameters per layer are
// weight [in, out] then bias [1, out]; `params` keeps that declaration order,
// which is also the checkpoint serialization order.
struct Mlp {
  MlpSpec spec;
  std::vector<Tensor> params;

  Tensor forward(Tape& t, const Tensor& x) const;
  // Value-only forward for networks that never receive gradients.
  Tensor forward_value(const Tensor& x) const;
};

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights
// and biases. Same seed gives bitwise identical parameters.
Mlp make_mlp(const MlpSpec& spec, uint64_t seed, bool requires_grad);

struct NetworkSpec {
  MlpSpec encoder{{32, 256, 256, 64}};
  MlpSpec projector{{64, 128, 64}};
  bool normalize_embeddings = true;
  double ema_gamma = 0.99;

  bool operator==(const NetworkSpec&) const = default;
};

// Online networks (f, h) train by gradient; target networks (g, q) start as
// exact copies and only ever move by EMA. Target parameters never require
// grad, so tape ops through them record nothing.
struct NetworkPair {
  NetworkSpec spec;
  Mlp online_encoder;    // f
  Mlp online_projector;  // h
  Mlp target_encoder;    // g
  Mlp target_projector;  // q
};

NetworkPair make_network_pair(const NetworkSpec& spec, uint64_t seed);

// h(f(x)) for row-stacked inputs x [n, d_in]; rows L2-normalized when the
// spec asks for it. Differentiable through the tape.
Tensor embed_online(Tape& t, const NetworkPair& net, const Tensor& x);

// q(g(x)), value only: the result is a constant with respect to any tape.
Tensor embed_target(const NetworkPair& net, const Tensor& x);

// Encoder output f(x) without projection or normalization; this is the
// representation evaluation probes and analysis consume.
Tensor representation(const NetworkPair& net, const Tensor& x);

// target <- gamma * target + (1 - gamma) * online, elementwise, in place.
void ema_update(NetworkPair& net);

struct ParamRef {
  Tensor tensor;
  bool is_bias;  // biases are excluded from weight decay and trust scaling
};

std::vector<ParamRef> online_params(NetworkPair& net);
std::vector<ParamRef> target_params(NetworkPair& net);

}  // namespace relic
