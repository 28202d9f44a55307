#include "relic/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace relic {

UnlabeledDataset strip_labels(const Dataset& d) {
  UnlabeledDataset u;
  u.images = d.images;
  u.masks = d.masks;
  return u;
}

namespace {

constexpr std::size_t kCifarRecord = 3073;
constexpr std::size_t kCifarSide = 32;
constexpr int kCifarClasses = 10;

void append_cifar_file(Dataset& out, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("load_cifar10_binary: cannot open " + path);
  f.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(f.tellg());
  f.seekg(0);
  if (bytes == 0 || bytes % kCifarRecord != 0)
    throw FormatError("load_cifar10_binary: size of " + path + " is not a multiple of 3073");
  const std::size_t records = bytes / kCifarRecord;
  std::vector<unsigned char> rec(kCifarRecord);
  for (std::size_t r = 0; r < records; ++r) {
    if (!f.read(reinterpret_cast<char*>(rec.data()), kCifarRecord))
      throw FormatError("load_cifar10_binary: short read in " + path);
    const int label = rec[0];
    if (label >= kCifarClasses)
      throw FormatError("load_cifar10_binary: label byte out of range in " + path);
    Image img = Image::zeros(kCifarSide, kCifarSide, 3);
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < kCifarSide; ++y)
        for (std::size_t x = 0; x < kCifarSide; ++x)
          img.at(y, x, ch) = rec[1 + ch * 1024 + y * kCifarSide + x] / 255.0;
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
}

}  // namespace

Dataset load_cifar10_binary(const std::string& path) {
  return load_cifar10_binary(std::vector<std::string>{path});
}

Dataset load_cifar10_binary(const std::vector<std::string>& paths) {
  if (paths.empty()) throw ConfigError("load_cifar10_binary: no files given");
  Dataset d;
  d.num_classes = kCifarClasses;
  for (const auto& p : paths) append_cifar_file(d, p);
  return d;
}

std::vector<std::vector<double>> synth_cluster_means_grid(std::size_t num_classes, std::size_t h,
                                                          std::size_t w, uint64_t seed,
                                                          double radius) {
  // Low-frequency unit fields: a coarse Gaussian grid upsampled to h x w.
  // Smooth means mirror how real-image semantics concentrate at low spatial
  // frequencies, which is the structure crop/blur augmentations preserve;
  // within-class noise stays white, so augmentations can tell them apart.
  const std::size_t ch = h == 1 ? 1 : std::max<std::size_t>(2, (h + 1) / 2);
  const std::size_t cw = w == 1 ? 1 : std::max<std::size_t>(2, (w + 1) / 2);
  std::vector<std::vector<double>> means(num_classes, std::vector<double>(h * w));
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto g = make_stream(stream_id(seed, "mean", c));
    double norm = 0.0;
    do {
      // resampling clamps to [0, 1], so draws ride on 0.5 at sigma 1/8 and
      // the offset is removed afterwards (bicubic reproduces constants)
      Image coarse = Image::zeros(ch, cw, 1);
      for (auto& v : coarse.px) v = 0.5 + rnorm(g) / 8.0;
      const Image field = resize_image(coarse, h, w);
      norm = 0.0;
      means[c] = field.px;
      for (auto& v : means[c]) {
        v -= 0.5;
        norm += v * v;
      }
      norm = std::sqrt(norm);
    } while (norm < 1e-12);
    for (auto& v : means[c]) v = 0.5 + radius * v / norm;
  }
  return means;
}

std::vector<std::vector<double>> synth_cluster_means(std::size_t num_classes, std::size_t dim,
                                                     uint64_t seed, double radius) {
  return synth_cluster_means_grid(num_classes, 1, dim, seed, radius);
}

Dataset synth_clusters(std::size_t num_classes, std::size_t per_class, std::size_t h,
                       std::size_t w, double spread, uint64_t seed) {
  if (num_classes == 0 || per_class == 0 || h == 0 || w == 0)
    throw ConfigError("synth_clusters: num_classes, per_class and dimensions must be positive");
  if (!(spread > 0.0)) throw ConfigError("synth_clusters: spread must be positive");

  const std::size_t dim = h * w;
  const auto means = synth_cluster_means_grid(num_classes, h, w, seed);
  Dataset d;
  d.num_classes = static_cast<int>(num_classes);
  d.images.reserve(num_classes * per_class);
  d.labels.reserve(num_classes * per_class);
  for (std::size_t c = 0; c < num_classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      auto g = make_stream(stream_id(seed, "point", c, i));
      Image img = Image::zeros(h, w, 1);
      for (std::size_t k = 0; k < dim; ++k)
        img.px[k] = std::clamp(means[c][k] + rnorm(g, 0.0, spread), 0.0, 1.0);
      d.images.push_back(std::move(img));
      d.labels.push_back(static_cast<int>(c));
    }
  return d;
}

Dataset synth_clusters(std::size_t num_classes, std::size_t per_class, std::size_t dim,
                       double spread, uint64_t seed) {
  return synth_clusters(num_classes, per_class, 1, dim, spread, seed);
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& d, double train_fraction,
                                             uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("stratified_split: train_fraction must lie strictly inside (0, 1)");
  if (!d.masks.empty() && d.masks.size() != d.images.size())
    throw ContractError("stratified_split: masks do not align with images");

  // bucket indices by class (single bucket when unlabeled), shuffle each
  // bucket on its own stream, take the leading fraction for train
  std::vector<std::vector<std::size_t>> buckets;
  if (d.labeled()) {
    buckets.resize(static_cast<std::size_t>(d.num_classes));
    for (std::size_t i = 0; i < d.labels.size(); ++i) {
      const int c = d.labels[i];
      if (c < 0 || c >= d.num_classes)
        throw ContractError("stratified_split: label outside [0, num_classes)");
      buckets[static_cast<std::size_t>(c)].push_back(i);
    }
  } else {
    buckets.emplace_back(d.images.size());
    for (std::size_t i = 0; i < d.images.size(); ++i) buckets[0][i] = i;
  }

  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t c = 0; c < buckets.size(); ++c) {
    auto g = make_stream(stream_id(seed, "split", c));
    fisher_yates(buckets[c], g);
    const auto n_train = static_cast<std::size_t>(
        std::lround(train_fraction * static_cast<double>(buckets[c].size())));
    for (std::size_t i = 0; i < buckets[c].size(); ++i)
      (i < n_train ? train_idx : val_idx).push_back(buckets[c][i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());

  auto take = [&](const std::vector<std::size_t>& idx) {
    Dataset out;
    out.num_classes = d.num_classes;
    for (std::size_t i : idx) {
      out.images.push_back(d.images[i]);
      if (d.labeled()) out.labels.push_back(d.labels[i]);
      if (!d.masks.empty()) out.masks.push_back(d.masks[i]);
    }
    return out;
  };
  return {take(train_idx), take(val_idx)};
}

}  // namespace relic
