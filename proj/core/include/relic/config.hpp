#pragma once

#include <cstdint>
#include <string>

#include "relic/augment.hpp"
#include "relic/nn.hpp"
#include "relic/objective.hpp"
#include "relic/optim.hpp"

namespace relic {

// Everything a run needs, addressable by name in a flat key=value file.
struct RunConfig {
  std::string preset = "synth";
  uint64_t seed = 1;
  std::size_t batch_size = 64;

  NetworkSpec network;
  LossConfig loss;
  AugmentationConfig augment;
  ScheduleConfig schedule;
  LarsConfig lars;

  // "synth:<classes>x<per_class>x<dim>:<spread>" (flat rows),
  // "synth:<classes>x<per_class>x<h>x<w>:<spread>" (grids), or
  // "cifar:<file>[,<file>...]"
  std::string dataset = "synth:8x500x4x8:0.11";
  std::string mask_file;        // optional saliency-mask container
  double train_fraction = 0.8;  // stratified probe/analysis split

  uint64_t checkpoint_every = 1000;
  std::string checkpoint_path = "relic.ckpt";
  std::string metrics_path = "metrics.csv";

  bool operator==(const RunConfig&) const = default;
};

// Named starting points:
//   synth       - 8x500 32-d Gaussian clusters, photometric-only augmentation
//   cifar-small - CIFAR-10 with 32/16 multi-crop and a flattened-input MLP
//   imagenet    - full-resolution parameter set (not expected to run at desk scale)
//   jft         - imagenet geometry with the large-corpus loss settings
//                 (contrast 0.3, invariance 2.0, temperature 0.2, EMA 0.996,
//                 mask probability 0.15, base rate 0.3)
RunConfig preset_config(const std::string& name);

// Flat key=value text. '#' starts a comment; keys apply in file order; a
// `preset = <name>` line resets everything to that preset, so it belongs
// first. Unknown keys are errors.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical rendering: every key, fixed order, %.17g doubles. Feeding the
// output back through parse_config_text reproduces the config exactly; this
// is the form checkpoints embed.
std::string serialize_config(const RunConfig& cfg);

// Structural checks (ranges, counts, cross-field consistency). Throws
// ConfigError with the offending key in the message.
void validate(const RunConfig& cfg);

}  // namespace relic
