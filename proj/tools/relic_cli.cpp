// Command-line front end: pretraining runs, linear-probe evaluation,
// latent-space reports, and saliency-mask generation.
//
// Exit codes: 0 success, 2 configuration problems (including bad command
// lines), 3 numeric aborts, 4 malformed files, 1 anything else.

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "relic/analysis.hpp"
#include "relic/augment.hpp"
#include "relic/config.hpp"
#include "relic/data.hpp"
#include "relic/errors.hpp"
#include "relic/train.hpp"

namespace {

using namespace relic;

int cmd_pretrain(const std::string& config_path, bool resume) {
  const RunConfig cfg = load_config(config_path);
  validate(cfg);

  TrainState state;
  if (resume) {
    state = load_checkpoint(cfg.checkpoint_path);
    if (!(state.cfg == cfg))
      throw ConfigError("pretrain: " + config_path + " disagrees with the config embedded in " +
                        cfg.checkpoint_path + "; refusing to resume a different run");
    std::printf("resuming %s at step %llu\n", cfg.checkpoint_path.c_str(),
                static_cast<unsigned long long>(state.step));
  } else {
    state = init_state(cfg);
  }

  const UnlabeledDataset data = strip_labels(make_dataset(cfg));
  pretrain_loop(state, data);
  std::printf("finished at step %llu\ncheckpoint: %s\nmetrics: %s\n",
              static_cast<unsigned long long>(state.step), cfg.checkpoint_path.c_str(),
              cfg.metrics_path.c_str());
  return 0;
}

int cmd_probe(const std::string& ckpt_path, const std::string& dataset_spec, bool raw_baseline,
              const ProbeConfig& probe) {
  TrainState state = load_checkpoint(ckpt_path);
  RunConfig cfg = state.cfg;
  if (!dataset_spec.empty()) cfg.dataset = dataset_spec;

  const Dataset full = make_dataset(cfg);
  if (!full.labeled()) throw ConfigError("probe: dataset carries no labels");
  const auto [train, val] = stratified_split(full, cfg.train_fraction, cfg.seed);

  const double learned = linear_probe(state.net, train, val, probe);
  std::printf("metric,value\nrepresentation_accuracy,%.17g\n", learned);
  if (raw_baseline) {
    const int classes = std::max(train.num_classes, val.num_classes);
    const double raw = linear_probe_features(flatten_dataset(train), train.labels,
                                             flatten_dataset(val), val.labels, classes, probe);
    std::printf("raw_pixel_accuracy,%.17g\n", raw);
  }
  return 0;
}

int cmd_analyze(const std::string& ckpt_path, const std::string& out_dir,
                const std::string& dataset_spec, std::size_t k, const std::string& split) {
  TrainState state = load_checkpoint(ckpt_path);
  RunConfig cfg = state.cfg;
  if (!dataset_spec.empty()) cfg.dataset = dataset_spec;

  const Dataset full = make_dataset(cfg);
  if (!full.labeled()) throw ConfigError("analyze: dataset carries no labels");
  Dataset chosen;
  if (split == "all") {
    chosen = full;
  } else {
    auto [train, val] = stratified_split(full, cfg.train_fraction, cfg.seed);
    chosen = split == "train" ? std::move(train) : std::move(val);
  }

  EmbeddingSet emb;
  emb.vectors = encode_dataset(state.net, chosen);
  emb.labels = chosen.labels;
  emb.source = ckpt_path + "@step" + std::to_string(state.step) + ":" + split;

  const AnalysisReport report = analyze(emb, k);
  emit_report(report, out_dir);
  std::printf("n,%zu\nk,%zu\npurity,%.17g\nratio_median,%.17g\nreport,%s\n", report.n, report.k,
              report.purity, report.pointwise.median, out_dir.c_str());
  return 0;
}

int cmd_gen_masks(const std::string& dataset_spec, const std::string& out_path, uint64_t seed) {
  RunConfig cfg;
  cfg.dataset = dataset_spec;
  cfg.seed = seed;
  cfg.mask_file.clear();
  const Dataset d = make_dataset(cfg);

  std::vector<SaliencyMask> masks;
  masks.reserve(d.size());
  for (const Image& img : d.images) masks.push_back(heuristic_saliency(img));
  save_masks(out_path, masks);
  std::printf("wrote %zu masks to %s\n", masks.size(), out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised representation learning at desk scale"};
  app.require_subcommand(1);

  std::string config_path;
  bool resume = false;
  auto* pre = app.add_subcommand("pretrain", "Run or resume a pretraining loop");
  pre->add_option("--config", config_path, "Run configuration file")->required();
  pre->add_flag("--resume", resume, "Continue from the configured checkpoint");

  std::string ckpt_path, dataset_spec;
  bool raw_baseline = false;
  ProbeConfig probe;
  auto* prb = app.add_subcommand("probe", "Linear-probe a checkpoint's representations");
  prb->add_option("--ckpt", ckpt_path, "Checkpoint to evaluate")->required();
  prb->add_option("--dataset", dataset_spec, "Override the embedded dataset spec");
  prb->add_flag("--raw", raw_baseline, "Also probe raw flattened pixels");
  prb->add_option("--epochs", probe.epochs, "Probe training epochs");
  prb->add_option("--probe-lr", probe.lr, "Probe learning rate");
  prb->add_option("--probe-batch", probe.batch_size, "Probe batch size");

  std::string out_dir, split = "val";
  std::size_t k = 5;
  auto* ana = app.add_subcommand("analyze", "Emit latent-space reports for a checkpoint");
  ana->add_option("--ckpt", ckpt_path, "Checkpoint to analyze")->required();
  ana->add_option("--out", out_dir, "Output directory for the report")->required();
  ana->add_option("--dataset", dataset_spec, "Override the embedded dataset spec");
  ana->add_option("--k", k, "Neighbors per point");
  ana->add_option("--split", split, "Which split to embed")
      ->check(CLI::IsMember({"train", "val", "all"}));

  std::string mask_out;
  uint64_t mask_seed = 1;
  auto* gen = app.add_subcommand("gen-masks", "Precompute heuristic saliency masks");
  gen->add_option("--dataset", dataset_spec, "Dataset spec to scan")->required();
  gen->add_option("--out", mask_out, "Mask container to write")->required();
  gen->add_option("--seed", mask_seed, "Seed for synthetic dataset specs");

  try {
    app.parse(argc, argv);
    if (pre->parsed()) return cmd_pretrain(config_path, resume);
    if (prb->parsed()) return cmd_probe(ckpt_path, dataset_spec, raw_baseline, probe);
    if (ana->parsed()) return cmd_analyze(ckpt_path, out_dir, dataset_spec, k, split);
    if (gen->parsed()) return cmd_gen_masks(dataset_spec, mask_out, mask_seed);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit cleanly; bad usage is a config error
  } catch (const relic::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const relic::NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const relic::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
