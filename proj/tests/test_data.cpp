#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "relic/data.hpp"
#include "relic/errors.hpp"
#include "relic/rng.hpp"

using namespace relic;

namespace {

void write_bytes(const char* path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("cifar binary layout: planar channels, scaling, labels") {
    std::vector<unsigned char> bytes(2 * 3073, 0);
    bytes[0] = 3;                  // record 0 label
    bytes[1] = 255;                // R at (0,0)
    bytes[1 + 1024] = 128;         // G at (0,0)
    bytes[1 + 2048] = 64;          // B at (0,0)
    bytes[1 + 33] = 10;            // R at (1,1): planar row-major offset 32+1
    bytes[3073] = 9;               // record 1 label
    bytes[3073 + 1 + 2048 + 1023] = 200;  // record 1, B at (31,31)
    write_bytes("cifar_two.bin", bytes);

    Dataset d = load_cifar10_binary("cifar_two.bin");
    REQUIRE(d.size() == 2);
    CHECK(d.num_classes == 10);
    CHECK(d.labels[0] == 3);
    CHECK(d.labels[1] == 9);
    REQUIRE(d.images[0].h == 32);
    REQUIRE(d.images[0].w == 32);
    REQUIRE(d.images[0].c == 3);
    CHECK(d.images[0].at(0, 0, 0) == 1.0);
    CHECK(d.images[0].at(0, 0, 1) == 128.0 / 255.0);
    CHECK(d.images[0].at(0, 0, 2) == 64.0 / 255.0);
    CHECK(d.images[0].at(1, 1, 0) == 10.0 / 255.0);
    CHECK(d.images[1].at(31, 31, 2) == 200.0 / 255.0);
    CHECK(d.images[1].at(0, 0, 0) == 0.0);

    // two-file load concatenates in argument order
    Dataset both = load_cifar10_binary({std::string("cifar_two.bin"), std::string("cifar_two.bin")});
    CHECK(both.size() == 4);
    CHECK(both.labels[2] == 3);
    std::remove("cifar_two.bin");
  }

  TEST_CASE("cifar loader rejects malformed files") {
    write_bytes("cifar_short.bin", std::vector<unsigned char>(3072, 0));
    CHECK_THROWS_AS(load_cifar10_binary("cifar_short.bin"), FormatError);
    std::remove("cifar_short.bin");

    std::vector<unsigned char> bad(3073, 0);
    bad[0] = 255;  // label out of range
    write_bytes("cifar_badlabel.bin", bad);
    CHECK_THROWS_AS(load_cifar10_binary("cifar_badlabel.bin"), FormatError);
    std::remove("cifar_badlabel.bin");

    CHECK_THROWS_AS(load_cifar10_binary("does_not_exist.bin"), FormatError);
    CHECK_THROWS_AS(load_cifar10_binary(std::vector<std::string>{}), ConfigError);
  }

  TEST_CASE("synthetic clusters: reproducible, bounded, balanced") {
    Dataset a = synth_clusters(4, 25, 16, 0.1, 77);
    Dataset b = synth_clusters(4, 25, 16, 0.1, 77);
    REQUIRE(a.size() == 100);
    CHECK(a.num_classes == 4);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.images[i].px == b.images[i].px);
      CHECK(a.labels[i] == b.labels[i]);
      CHECK(a.images[i].h == 1);
      CHECK(a.images[i].w == 16);
      CHECK(a.images[i].c == 1);
      for (double v : a.images[i].px) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
    std::vector<int> counts(4, 0);
    for (int l : a.labels) ++counts[l];
    for (int c : counts) CHECK(c == 25);

    Dataset other = synth_clusters(4, 25, 16, 0.1, 78);
    CHECK(other.images[0].px != a.images[0].px);

    CHECK_THROWS_AS(synth_clusters(0, 5, 4, 0.1, 1), ConfigError);
    CHECK_THROWS_AS(synth_clusters(2, 5, 4, 0.0, 1), ConfigError);
  }

  TEST_CASE("vanishing spread collapses points onto the constructed means") {
    const std::size_t classes = 6, per = 10, dim = 12;
    Dataset d = synth_clusters(classes, per, dim, 1e-13, 99);
    auto means = synth_cluster_means(classes, dim, 99);

    std::vector<std::vector<double>> centroid(classes, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < d.size(); ++i)
      for (std::size_t k = 0; k < dim; ++k)
        centroid[d.labels[i]][k] += d.images[i].px[k] / per;

    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t c2 = c + 1; c2 < classes; ++c2)
        CHECK(dist(centroid[c], centroid[c2]) ==
              doctest::Approx(dist(means[c], means[c2])).epsilon(1e-9));

    // within-class scatter vanishes with the spread
    for (std::size_t i = 0; i < d.size(); ++i)
      CHECK(dist(d.images[i].px, centroid[d.labels[i]]) < 1e-10);

    // means sit on the configured sphere around 0.5
    for (const auto& m : means) {
      std::vector<double> center(dim, 0.5);
      CHECK(dist(m, center) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }

  TEST_CASE("stripping labels produces a label-free view with identical pixels") {
    Dataset d = synth_clusters(3, 4, 8, 0.05, 5);
    UnlabeledDataset u = strip_labels(d);
    REQUIRE(u.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(u.images[i].px == d.images[i].px);
    // UnlabeledDataset has no labels member at all; nothing further to check
    // at runtime - the separation is enforced by the type.
  }

  TEST_CASE("stratified split preserves class balance and partitions the data") {
    Dataset d = synth_clusters(5, 40, 8, 0.1, 123);
    auto [train, val] = stratified_split(d, 0.75, 9);
    CHECK(train.size() == 150);
    CHECK(val.size() == 50);
    CHECK(train.num_classes == 5);

    std::vector<int> tc(5, 0), vc(5, 0);
    for (int l : train.labels) ++tc[l];
    for (int l : val.labels) ++vc[l];
    for (int c = 0; c < 5; ++c) {
      CHECK(tc[c] == 30);
      CHECK(vc[c] == 10);
    }

    // determinism + disjointness: pixel multiset of train+val equals original
    auto [train2, val2] = stratified_split(d, 0.75, 9);
    for (std::size_t i = 0; i < train.size(); ++i) CHECK(train.images[i].px == train2.images[i].px);
    std::vector<std::vector<double>> all;
    for (const auto& im : train.images) all.push_back(im.px);
    for (const auto& im : val.images) all.push_back(im.px);
    std::vector<std::vector<double>> orig;
    for (const auto& im : d.images) orig.push_back(im.px);
    std::sort(all.begin(), all.end());
    std::sort(orig.begin(), orig.end());
    CHECK(all == orig);

    CHECK_THROWS_AS(stratified_split(d, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(stratified_split(d, 1.0, 1), ConfigError);
  }
}
