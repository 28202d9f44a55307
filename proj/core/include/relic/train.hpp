#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relic/config.hpp"
#include "relic/data.hpp"
#include "relic/nn.hpp"
#include "relic/objective.hpp"
#include "relic/optim.hpp"

namespace relic {

// Everything a run carries between steps; checkpoints serialize exactly this.
struct TrainState {
  RunConfig cfg;
  NetworkPair net;
  OptState opt;
  uint64_t step = 0;
};

// Resolves cfg.dataset: "synth:<classes>x<per_class>x<dim>:<spread>" or
// "cifar:<file>[,<file>...]". Masks from cfg.mask_file are attached when set.
Dataset make_dataset(const RunConfig& cfg);

// Fresh state: validated config, seeded network pair, empty optimizer.
TrainState init_state(const RunConfig& cfg);

// Runs steps [state.step, total_steps). Per step: deterministic epoch
// shuffle -> multi-crop view generation -> batch loss -> backward ->
// layer-adaptive update -> EMA target update. Appends one metrics row per
// step ("step,lr,loss,contrastive,invariance,grad_norm", %.17g) to
// cfg.metrics_path (header written when starting at step 0) and writes a
// checkpoint every cfg.checkpoint_every steps and at the end. A non-finite
// loss or gradient aborts with the last written checkpoint left in place.
//
// stop_step > 0 pauses the run once state.step reaches it (clamped to
// total_steps); resuming from the checkpoint continues bitwise identically,
// because the learning-rate schedule always reads cfg.schedule.total_steps.
void pretrain_loop(TrainState& state, const UnlabeledDataset& data, uint64_t stop_step = 0);

// init + strip_labels(make_dataset) + loop.
TrainState pretrain(const RunConfig& cfg);

// Bit-exact state container: magic/version, step, seed, canonical config
// text, every parameter of the four networks, optimizer momentum.
void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

// Frozen-representation rows for probes and analysis, one per image. Images
// whose flattened width differs from the encoder's input width are first
// re-rendered to the square geometry the encoder was trained on (side =
// sqrt(width / channels)); a non-square expectation is a ContractError.
std::vector<std::vector<double>> encode_dataset(const NetworkPair& net, const Dataset& d);
// Raw pixels as feature rows (the no-encoder baseline).
std::vector<std::vector<double>> flatten_dataset(const Dataset& d);

struct ProbeConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  double lr = 0.5;
  double momentum = 0.9;  // no weight decay, by protocol
  uint64_t seed = 1;
};

// Softmax cross-entropy linear classifier on fixed feature rows; returns
// top-1 accuracy on the validation rows.
double linear_probe_features(const std::vector<std::vector<double>>& train_x,
                             const std::vector<int>& train_y,
                             const std::vector<std::vector<double>>& val_x,
                             const std::vector<int>& val_y, int num_classes,
                             const ProbeConfig& cfg);

// Probe over frozen encoder representations; the encoder is only ever read.
double linear_probe(const NetworkPair& net, const Dataset& train, const Dataset& val,
                    const ProbeConfig& cfg);

}  // namespace relic
