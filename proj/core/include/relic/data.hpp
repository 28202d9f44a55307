#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "relic/augment.hpp"

namespace relic {

// Labeled dataset used by probes and analysis.
struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;          // empty when unlabeled
  std::vector<SaliencyMask> masks;  // empty, or aligned 1:1 with images
  int num_classes = 0;

  std::size_t size() const { return images.size(); }
  bool labeled() const { return !labels.empty(); }
};

// The view handed to pretraining. It has no labels field at all, so the
// pretraining path is label-blind by construction, not by discipline.
struct UnlabeledDataset {
  std::vector<Image> images;
  std::vector<SaliencyMask> masks;

  std::size_t size() const { return images.size(); }
};

UnlabeledDataset strip_labels(const Dataset& d);

// Binary batch file(s): records of 3073 bytes, one label byte then 3072
// channel-planar pixel bytes (1024 R, 1024 G, 1024 B), 32x32 row-major.
// Pixels are scaled to [0, 1]. Labels must be < 10.
Dataset load_cifar10_binary(const std::string& path);
Dataset load_cifar10_binary(const std::vector<std::string>& paths);

// Class means placed at 0.5 + radius * (smooth random unit field): a coarse
// Gaussian grid bicubically upsampled to h x w, then normalized. Smoothness
// gives class identity the low-spatial-frequency character that crop and
// blur augmentations preserve while white within-class noise is not. The
// helpers are public so tests can compare dataset geometry against the
// construction.
std::vector<std::vector<double>> synth_cluster_means_grid(std::size_t num_classes, std::size_t h,
                                                          std::size_t w, uint64_t seed,
                                                          double radius = 0.25);
std::vector<std::vector<double>> synth_cluster_means(std::size_t num_classes, std::size_t dim,
                                                     uint64_t seed, double radius = 0.25);

// Gaussian blobs around those means, clamped to [0, 1] and rendered as
// h x w x 1 images (dim = h * w, row-major) so both the photometric and the
// geometric augmentation interfaces apply. Values depend only on (seed,
// class, index, h * w), not on the grid shape.
Dataset synth_clusters(std::size_t num_classes, std::size_t per_class, std::size_t h,
                       std::size_t w, double spread, uint64_t seed);

// Flat variant: 1 x dim x 1 rows for photometric-only augmentation.
Dataset synth_clusters(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                       double spread, uint64_t seed);

// Deterministic per-class split; every class contributes ~train_fraction of
// its points to the first dataset. Unlabeled data splits uniformly.
std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double train_fraction,
                                             uint64_t seed);

}  // namespace relic
