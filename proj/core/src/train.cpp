#include "relic/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace relic {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

uint64_t to_u64(const std::string& what, const std::string& v) {
  try {
    std::size_t pos = 0;
    const auto u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("dataset spec: bad integer '" + v + "' in " + what);
  }
}

double to_double(const std::string& what, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("dataset spec: bad number '" + v + "' in " + what);
  }
}

}  // namespace

Dataset make_dataset(const RunConfig& cfg) {
  const auto colon = cfg.dataset.find(':');
  if (colon == std::string::npos)
    throw ConfigError("dataset spec '" + cfg.dataset + "' needs a '<kind>:' prefix");
  const std::string kind = cfg.dataset.substr(0, colon);
  const std::string rest = cfg.dataset.substr(colon + 1);

  Dataset d;
  if (kind == "synth") {
    // synth:<classes>x<per_class>x<dim>:<spread> for flat rows, or
    // synth:<classes>x<per_class>x<h>x<w>:<spread> for grids crops can bite
    const auto parts = split(rest, ':');
    if (parts.size() != 2)
      throw ConfigError("dataset spec: expected synth:<classes>x<per>x<dim>:<spread>");
    const auto dims = split(parts[0], 'x');
    if (dims.size() != 3 && dims.size() != 4)
      throw ConfigError("dataset spec: expected <classes>x<per>x<dim> or <classes>x<per>x<h>x<w>, got '" +
                        parts[0] + "'");
    const std::size_t h = dims.size() == 4 ? to_u64("synth", dims[2]) : 1;
    const std::size_t w = to_u64("synth", dims.back());
    d = synth_clusters(to_u64("synth", dims[0]), to_u64("synth", dims[1]), h, w,
                       to_double("synth", parts[1]), cfg.seed);
  } else if (kind == "cifar") {
    d = load_cifar10_binary(split(rest, ','));
  } else {
    throw ConfigError("dataset spec: unknown kind '" + kind + "'");
  }

  if (!cfg.mask_file.empty()) {
    d.masks = load_masks(cfg.mask_file);
    if (d.masks.size() != d.images.size())
      throw ContractError("mask file holds " + std::to_string(d.masks.size()) +
                          " masks for " + std::to_string(d.images.size()) + " images");
  }
  return d;
}

TrainState init_state(const RunConfig& cfg) {
  validate(cfg);
  TrainState st;
  st.cfg = cfg;
  st.net = make_network_pair(cfg.network, cfg.seed);
  st.step = 0;
  return st;
}

void pretrain_loop(TrainState& state, const UnlabeledDataset& data, uint64_t stop_step) {
  const RunConfig& cfg = state.cfg;
  validate(cfg);
  const std::size_t n = data.size();
  const std::size_t batch = cfg.batch_size;
  if (n < batch) throw ConfigError("pretrain: dataset has fewer images than one batch");
  if (!data.masks.empty() && data.masks.size() != n)
    throw ContractError("pretrain: masks do not align with images");

  // the encoder consumes flattened views; its input width must match what the
  // augmentation stage will hand it
  const std::size_t want = cfg.network.encoder.widths.front();
  const Image& probe = data.images.front();
  const std::size_t fed = cfg.augment.geometric
                              ? cfg.augment.large_size * cfg.augment.large_size * probe.c
                              : probe.numel();
  if (fed != want)
    throw ConfigError("pretrain: views flatten to " + std::to_string(fed) +
                      " values but the encoder expects " + std::to_string(want));

  const std::size_t steps_per_epoch = std::max<std::size_t>(1, n / batch);

  std::ofstream metrics(cfg.metrics_path, state.step == 0 ? std::ios::trunc : std::ios::app);
  if (!metrics) throw FormatError("pretrain: cannot open metrics file " + cfg.metrics_path);
  if (state.step == 0) metrics << "step,lr,loss,contrastive,invariance,grad_norm\n";

  auto params = online_params(state.net);
  uint64_t cached_epoch = ~uint64_t{0};
  std::vector<std::size_t> order(n);

  uint64_t end = cfg.schedule.total_steps;
  if (stop_step > 0) end = std::min(end, stop_step);

  for (uint64_t step = state.step; step < end; ++step) {
    const uint64_t epoch = step / steps_per_epoch;
    const std::size_t pos = step % steps_per_epoch;
    if (epoch != cached_epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      auto g = make_stream(stream_id(cfg.seed, "shuffle", epoch));
      fisher_yates(order, g);
      cached_epoch = epoch;
    }

    ViewBatch views(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t idx = order[pos * batch + b];
      const SaliencyMask* mask = data.masks.empty() ? nullptr : &data.masks[idx];
      views[b] =
          generate_views(data.images[idx], mask, cfg.augment, stream_id(cfg.seed, "aug", epoch, idx));
      if (cfg.augment.geometric)  // re-render small crops at encoder geometry
        for (auto& sv : views[b].small)
          sv.image = resize_image(sv.image, cfg.augment.large_size, cfg.augment.large_size);
    }

    Tape t;
    BatchLossStats stats;
    Tensor loss =
        batch_loss(t, views, state.net, cfg.loss, stream_id(cfg.seed, "step", step), &stats);
    for (auto& p : params) p.tensor.zero_grad();
    t.backward(loss);

    double grad_sq = 0.0;
    for (const auto& p : params)
      for (double g : p.tensor.grad_or_empty()) grad_sq += g * g;
    const double grad_norm = std::sqrt(grad_sq);

    const double lr = cosine_lr(step, cfg.schedule);
    lars_step(params, lr, cfg.lars, state.opt);
    ema_update(state.net);
    state.step = step + 1;

    char row[256];
    std::snprintf(row, sizeof row, "%llu,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<unsigned long long>(step), lr, loss.item(), stats.contrastive,
                  stats.invariance, grad_norm);
    metrics << row;
    metrics.flush();

    if (state.step % cfg.checkpoint_every == 0 || state.step == cfg.schedule.total_steps)
      save_checkpoint(cfg.checkpoint_path, state);
  }
}

TrainState pretrain(const RunConfig& cfg) {
  TrainState st = init_state(cfg);
  const UnlabeledDataset data = strip_labels(make_dataset(cfg));
  pretrain_loop(st, data);
  return st;
}

namespace {

constexpr char kMagic[4] = {'R', 'L', 'V', '2'};
constexpr uint32_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

struct Reader {
  const std::string& buf;
  std::size_t off = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (off + n > buf.size()) throw FormatError("checkpoint: truncated file " + path);
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    off += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(buf[off + i])) << (8 * i);
    off += 8;
    return v;
  }
  double f64() {
    const uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(off, n);
    off += n;
    return s;
  }
};

// online encoder, online projector, target encoder, target projector -
// declaration order of NetworkPair, each Mlp in its own params order.
std::vector<const Mlp*> networks_of(const NetworkPair& net) {
  return {&net.online_encoder, &net.online_projector, &net.target_encoder, &net.target_projector};
}
std::vector<Mlp*> networks_of(NetworkPair& net) {
  return {&net.online_encoder, &net.online_projector, &net.target_encoder, &net.target_projector};
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainState& state) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u64(out, state.step);
  put_u64(out, state.cfg.seed);

  const std::string cfg_text = serialize_config(state.cfg);
  put_u64(out, cfg_text.size());
  out += cfg_text;

  for (const Mlp* mlp : networks_of(state.net))
    for (const Tensor& p : mlp->params)
      for (double v : p.value()) put_f64(out, v);

  put_u64(out, state.opt.momentum.size());
  for (const auto& buf : state.opt.momentum) {
    put_u64(out, buf.size());
    for (double v : buf) put_f64(out, v);
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("checkpoint: cannot open " + tmp);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("checkpoint: write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw FormatError("checkpoint: cannot move " + tmp + " into place: " + ec.message());
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("checkpoint: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string buf = ss.str();
  Reader r{buf, 0, path};

  const std::string magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw FormatError("checkpoint: bad magic in " + path);
  const uint32_t version = r.u32();
  if (version != kVersion)
    throw FormatError("checkpoint: unsupported version " + std::to_string(version) + " in " + path +
                      " (expected " + std::to_string(kVersion) + ")");

  TrainState st;
  st.step = r.u64();
  const uint64_t seed = r.u64();
  const uint64_t cfg_len = r.u64();
  st.cfg = parse_config_text(r.bytes(cfg_len));
  if (st.cfg.seed != seed)
    throw FormatError("checkpoint: embedded config disagrees with stored seed in " + path);
  validate(st.cfg);

  st.net = make_network_pair(st.cfg.network, st.cfg.seed);
  for (Mlp* mlp : networks_of(st.net))
    for (Tensor& p : mlp->params)
      for (double& v : p.value()) v = r.f64();

  const uint64_t n_buffers = r.u64();
  st.opt.momentum.resize(n_buffers);
  for (auto& b : st.opt.momentum) {
    const uint64_t len = r.u64();
    b.resize(len);
    for (double& v : b) v = r.f64();
  }
  if (n_buffers != 0) {
    auto params = online_params(st.net);
    if (st.opt.momentum.size() != params.size())
      throw FormatError("checkpoint: optimizer state does not match the parameter list in " + path);
    for (std::size_t i = 0; i < params.size(); ++i)
      if (st.opt.momentum[i].size() != params[i].tensor.size())
        throw FormatError("checkpoint: optimizer buffer size mismatch in " + path);
  }

  if (r.off != buf.size()) throw FormatError("checkpoint: trailing data in " + path);
  return st;
}

std::vector<std::vector<double>> encode_dataset(const NetworkPair& net, const Dataset& d) {
  if (d.images.empty()) throw ContractError("encode_dataset: empty dataset");
  const std::size_t chunk = 256;
  std::vector<std::vector<double>> out;
  out.reserve(d.size());
  const std::size_t width = net.spec.encoder.widths.front();

  // evaluation protocol: when native geometry differs from what the encoder
  // was trained on, re-render at the encoder's (square) input size
  std::size_t side = 0;
  if (d.images.front().numel() != width) {
    const std::size_t c = d.images.front().c;
    side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(width / c))));
    if (c == 0 || side * side * c != width)
      throw ContractError("encode_dataset: images flatten to " +
                          std::to_string(d.images.front().numel()) +
                          " values and the encoder's " + std::to_string(width) +
                          " is not a square geometry to re-render at");
  }

  for (std::size_t start = 0; start < d.size(); start += chunk) {
    const std::size_t rows = std::min(chunk, d.size() - start);
    std::vector<double> flat;
    flat.reserve(rows * width);
    for (std::size_t i = 0; i < rows; ++i) {
      Image rendered;
      const Image* use = &d.images[start + i];
      if (side != 0) {
        rendered = resize_image(*use, side, side);
        use = &rendered;
      }
      if (use->numel() != width) throw ContractError("encode_dataset: images disagree in size");
      flat.insert(flat.end(), use->px.begin(), use->px.end());
    }
    Tensor x = Tensor::from({rows, width}, std::move(flat));
    Tensor r = representation(net, x);
    for (std::size_t i = 0; i < rows; ++i) {
      std::vector<double> row(r.cols());
      for (std::size_t j = 0; j < r.cols(); ++j) row[j] = r.at(i, j);
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<std::vector<double>> flatten_dataset(const Dataset& d) {
  std::vector<std::vector<double>> out;
  out.reserve(d.size());
  for (const auto& im : d.images) out.push_back(im.px);
  return out;
}

double linear_probe_features(const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& val_x,
                             const std::vector<int>& val_y, int num_classes,
                             const ProbeConfig& cfg) {
  if (train_x.empty() || val_x.empty()) throw ContractError("linear_probe: empty split");
  if (train_x.size() != train_y.size() || val_x.size() != val_y.size())
    throw ContractError("linear_probe: features and labels disagree in length");
  if (cfg.epochs == 0 || cfg.batch_size == 0)
    throw ConfigError("linear_probe: epochs and batch_size must be positive");
  if (num_classes < 2) throw ConfigError("linear_probe: need at least two classes");
  const std::size_t d = train_x.front().size();
  const auto C = static_cast<std::size_t>(num_classes);
  for (const auto* xs : {&train_x, &val_x})
    for (const auto& row : *xs)
      if (row.size() != d) throw ContractError("linear_probe: feature rows disagree in width");
  for (const auto* ys : {&train_y, &val_y})
    for (int y : *ys)
      if (y < 0 || y >= num_classes) throw ContractError("linear_probe: label out of range");
  std::vector<char> seen_train(C, 0);
  int train_distinct = 0;
  for (int y : train_y)
    if (!seen_train[static_cast<std::size_t>(y)]) {
      seen_train[static_cast<std::size_t>(y)] = 1;
      ++train_distinct;
    }
  if (train_distinct < 2)
    throw ContractError("linear_probe: training split is single-class; nothing to separate");

  Tensor W = Tensor::zeros({d, C}, true);
  Tensor b = Tensor::zeros({1, C}, true);
  std::vector<ParamRef> params = {{W, false}, {b, true}};
  OptState st;

  const std::size_t n = train_x.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto g = make_stream(stream_id(cfg.seed, "probe-shuffle", epoch));
    fisher_yates(order, g);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t rows = std::min(cfg.batch_size, n - start);
      std::vector<double> flat(rows * d), onehot(rows * C, 0.0);
      for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t idx = order[start + i];
        std::copy(train_x[idx].begin(), train_x[idx].end(), flat.begin() + i * d);
        onehot[i * C + static_cast<std::size_t>(train_y[idx])] = 1.0;
      }
      Tape t;
      Tensor X = Tensor::from({rows, d}, std::move(flat));
      Tensor mask = Tensor::from({rows, C}, std::move(onehot));
      Tensor logits = t.add(t.matmul(X, W), b);
      Tensor picked = t.mul(t.log_softmax(logits), mask);
      Tensor loss = t.scale(t.sum(picked), -1.0 / static_cast<double>(rows));
      W.zero_grad();
      b.zero_grad();
      t.backward(loss);
      sgd_nesterov_step(params, cfg.lr, cfg.momentum, st);
    }
  }

  // argmax scoring; ties resolve to the lower class index
  std::size_t correct = 0;
  for (std::size_t i = 0; i < val_x.size(); ++i) {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < C; ++c) {
      double s = b.value()[c];
      for (std::size_t j = 0; j < d; ++j) s += val_x[i][j] * W.at(j, c);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    correct += best == static_cast<std::size_t>(val_y[i]);
  }
  return static_cast<double>(correct) / static_cast<double>(val_x.size());
}

double linear_probe(const NetworkPair& net, const Dataset& train, const Dataset& val,
                    const ProbeConfig& cfg) {
  if (!train.labeled() || !val.labeled()) throw ContractError("linear_probe: splits need labels");
  const int classes = std::max(train.num_classes, val.num_classes);
  return linear_probe_features(encode_dataset(net, train), train.labels,
                               encode_dataset(net, val), val.labels, classes, cfg);
}

}  // namespace relic
