#include "relic/nn.hpp"

#include <cmath>
#include <string>

#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace relic {

Tensor Mlp::forward(Tape& t, const Tensor& x) const {
  if (x.cols() != spec.widths.front())
    throw DimensionError("Mlp::forward: input width " + std::to_string(x.cols()) +
                         " does not match spec width " + std::to_string(spec.widths.front()));
  Tensor h = x;
  const std::size_t layers = spec.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    h = t.add(t.matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers) h = t.relu(h);
  }
  return h;
}

Tensor Mlp::forward_value(const Tensor& x) const {
  // A throwaway tape over grad-free tensors records no nodes.
  Tape t;
  return forward(t, x);
}

Mlp make_mlp(const MlpSpec& spec, uint64_t seed, bool requires_grad) {
  if (spec.widths.size() < 2) throw ConfigError("make_mlp: spec needs at least input and output widths");
  Mlp mlp;
  mlp.spec = spec;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    const std::size_t fan_in = spec.widths[l], fan_out = spec.widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    auto g = make_stream(stream_id(seed, "init", l));
    Tensor w = Tensor::zeros({fan_in, fan_out}, requires_grad);
    for (auto& v : w.value()) v = runif(g, -bound, bound);
    Tensor b = Tensor::zeros({1, fan_out}, requires_grad);
    for (auto& v : b.value()) v = runif(g, -bound, bound);
    mlp.params.push_back(w);
    mlp.params.push_back(b);
  }
  return mlp;
}

namespace {

Mlp clone_frozen(const Mlp& src) {
  Mlp out;
  out.spec = src.spec;
  for (const auto& p : src.params) {
    Tensor c = Tensor::zeros(p.shape(), false);
    std::copy(p.value().begin(), p.value().end(), c.value().begin());
    out.params.push_back(c);
  }
  return out;
}

}  // namespace

NetworkPair make_network_pair(const NetworkSpec& spec, uint64_t seed) {
  if (spec.encoder.widths.back() != spec.projector.widths.front())
    throw ConfigError("make_network_pair: projector input width must equal encoder output width");
  if (!(spec.ema_gamma >= 0.0 && spec.ema_gamma <= 1.0))
    throw ConfigError("make_network_pair: ema_gamma must lie in [0, 1]");
  NetworkPair net;
  net.spec = spec;
  net.online_encoder = make_mlp(spec.encoder, stream_id(seed, "encoder"), true);
  net.online_projector = make_mlp(spec.projector, stream_id(seed, "projector"), true);
  net.target_encoder = clone_frozen(net.online_encoder);
  net.target_projector = clone_frozen(net.online_projector);
  return net;
}

Tensor embed_online(Tape& t, const NetworkPair& net, const Tensor& x) {
  Tensor z = net.online_projector.forward(t, net.online_encoder.forward(t, x));
  return net.spec.normalize_embeddings ? t.l2_normalize(z) : z;
}

Tensor embed_target(const NetworkPair& net, const Tensor& x) {
  Tape t;  // target params carry no grad flag; nothing is recorded
  Tensor z = net.target_projector.forward(t, net.target_encoder.forward(t, x));
  return net.spec.normalize_embeddings ? t.l2_normalize(z) : z;
}

Tensor representation(const NetworkPair& net, const Tensor& x) {
  Tape t;
  Tensor h = net.online_encoder.forward(t, x);
  Tensor out = Tensor::zeros(h.shape(), false);
  std::copy(h.value().begin(), h.value().end(), out.value().begin());
  return out;
}

void ema_update(NetworkPair& net) {
  const double gamma = net.spec.ema_gamma;
  auto blend = [gamma](Mlp& target, const Mlp& online) {
    for (std::size_t i = 0; i < target.params.size(); ++i) {
      auto tv = target.params[i].value();
      auto ov = online.params[i].value();
      for (std::size_t j = 0; j < tv.size(); ++j) tv[j] = gamma * tv[j] + (1.0 - gamma) * ov[j];
    }
  };
  blend(net.target_encoder, net.online_encoder);
  blend(net.target_projector, net.online_projector);
}

namespace {

std::vector<ParamRef> collect(Mlp& a, Mlp& b) {
  std::vector<ParamRef> out;
  for (Mlp* m : {&a, &b})
    for (std::size_t i = 0; i < m->params.size(); ++i)
      out.push_back(ParamRef{m->params[i], i % 2 == 1});
  return out;
}

}  // namespace

std::vector<ParamRef> online_params(NetworkPair& net) {
  return collect(net.online_encoder, net.online_projector);
}

std::vector<ParamRef> target_params(NetworkPair& net) {
  return collect(net.target_encoder, net.target_projector);
}

}  // namespace relic
