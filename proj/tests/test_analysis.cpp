#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "relic/analysis.hpp"
#include "relic/errors.hpp"
#include "relic/rng.hpp"

namespace fs = std::filesystem;
using namespace relic;

namespace {

EmbeddingSet from_1d(const std::vector<double>& xs, const std::vector<int>& labels) {
  EmbeddingSet e;
  for (double x : xs) e.vectors.push_back({x});
  e.labels = labels;
  return e;
}

// Straight-line O(N^2) reimplementation used as the exactness oracle.
std::vector<std::vector<Neighbor>> brute_knn(const EmbeddingSet& e, std::size_t k) {
  const std::size_t n = e.size();
  std::vector<std::vector<Neighbor>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < e.vectors[i].size(); ++c) {
        const double diff = e.vectors[i][c] - e.vectors[j][c];
        d2 += diff * diff;
      }
      all.emplace_back(d2, j);
    }
    std::sort(all.begin(), all.end());
    for (std::size_t r = 0; r < k; ++r)
      out[i].push_back(Neighbor{all[r].second, std::sqrt(all[r].first)});
  }
  return out;
}

double brute_purity(const EmbeddingSet& e, std::size_t k) {
  const auto table = brute_knn(e, k);
  std::size_t same = 0;
  for (std::size_t i = 0; i < table.size(); ++i)
    for (const auto& nb : table[i]) same += e.labels[nb.index] == e.labels[i];
  return static_cast<double>(same) / static_cast<double>(table.size() * k);
}

EmbeddingSet random_set(uint64_t seed, std::size_t n, std::size_t dim, int classes,
                        double class_shift) {
  EmbeddingSet e;
  auto g = make_stream(stream_id(seed, "analysis-test"));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(classes));
    std::vector<double> v(dim);
    for (auto& x : v) x = rnorm(g);
    v[0] += class_shift * label;
    e.vectors.push_back(std::move(v));
    e.labels.push_back(label);
  }
  return e;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(static_cast<bool>(f));
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t count = 0, pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

std::size_t count_lines(const std::string& text) {
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("two points are each other's nearest neighbor at the exact distance") {
  EmbeddingSet e;
  e.vectors = {{1.0, 2.0}, {4.0, 6.0}};
  e.labels = {0, 1};
  const auto table = knn_table(e, 1);
  CHECK(table[0][0].index == 1);
  CHECK(table[1][0].index == 0);
  CHECK(table[0][0].distance == 5.0);
  CHECK(table[1][0].distance == 5.0);
}

TEST_CASE("collinear points rank neighbors by arithmetic distance") {
  const EmbeddingSet e = from_1d({0.0, 1.0, 3.0}, {0, 0, 0});
  const auto table = knn_table(e, 2);
  CHECK(table[0] == std::vector<Neighbor>{{1, 1.0}, {2, 3.0}});
  CHECK(table[1] == std::vector<Neighbor>{{0, 1.0}, {2, 2.0}});
  CHECK(table[2] == std::vector<Neighbor>{{1, 2.0}, {0, 3.0}});
}

TEST_CASE("equal distances break toward the lower index") {
  const EmbeddingSet e = from_1d({0.0, 1.0, -1.0}, {0, 0, 0});
  const auto table = knn_table(e, 2);
  CHECK(table[0][0].index == 1);
  CHECK(table[0][1].index == 2);
  CHECK(table[0][0].distance == table[0][1].distance);
}

TEST_CASE("knn_table matches the brute-force oracle exactly") {
  const EmbeddingSet e = random_set(41, 200, 8, 4, 1.5);
  for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{199}}) {
    CAPTURE(k);
    CHECK(knn_table(e, k) == brute_knn(e, k));
  }
}

TEST_CASE("neighbor_purity matches the brute-force recount exactly") {
  const EmbeddingSet e = random_set(42, 150, 6, 3, 2.0);
  for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{20}})
    CHECK(neighbor_purity(e, k) == brute_purity(e, k));
}

TEST_CASE("knn_table rejects out-of-range k and malformed sets") {
  EmbeddingSet e;
  e.vectors = {{0.0}, {1.0}, {2.0}};
  e.labels = {0, 1, 0};
  CHECK_THROWS_AS(knn_table(e, 0), ConfigError);
  CHECK_THROWS_AS(knn_table(e, 3), ConfigError);
  CHECK_THROWS_AS(neighbor_purity(e, 5), ConfigError);

  EmbeddingSet tiny;
  tiny.vectors = {{0.0}};
  tiny.labels = {0};
  CHECK_THROWS_AS(knn_table(tiny, 1), ContractError);

  EmbeddingSet ragged = e;
  ragged.vectors[1] = {1.0, 2.0};
  CHECK_THROWS_AS(knn_table(ragged, 1), ContractError);

  EmbeddingSet mislabeled = e;
  mislabeled.labels.pop_back();
  CHECK_THROWS_AS(knn_table(mislabeled, 1), ContractError);
}

TEST_CASE("well-separated tight clusters give very large ratios and perfect purity") {
  EmbeddingSet e;
  for (double dx : {0.0, 1e-3})
    for (double dy : {0.0, 1e-3}) {
      e.vectors.push_back({dx, dy});
      e.labels.push_back(0);
    }
  for (double dx : {0.0, 1e-3})
    for (double dy : {0.0, 1e-3}) {
      e.vectors.push_back({10.0 + dx, dy});
      e.labels.push_back(1);
    }

  const auto rep = discriminant_ratio(e);
  CHECK(rep.defined == 8);
  for (double r : rep.ratios) CHECK(r > 100.0);
  CHECK(rep.median > 100.0);
  CHECK(neighbor_purity(e, 3) == 1.0);

  // with nested neighbor sets, growing k can only dilute purity here
  double prev = 1.0;
  for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{4}, std::size_t{5},
                        std::size_t{7}}) {
    const double p = neighbor_purity(e, k);
    CHECK(p <= prev);
    prev = p;
  }
  CHECK(prev < 1.0);  // k exceeded the class size by the end
}

TEST_CASE("two axis-aligned pairs give the hand-computed ratio") {
  EmbeddingSet e;
  e.vectors = {{0.0, 0.0}, {0.0, 1.0}, {10.0, 0.0}, {10.0, 1.0}};
  e.labels = {0, 0, 1, 1};

  const double expected = (10.0 + std::sqrt(101.0)) / 2.0;  // within-mean is exactly 1
  const auto rep = discriminant_ratio(e);
  CHECK(rep.defined == 4);
  for (double r : rep.ratios) CHECK(r == doctest::Approx(expected).epsilon(1e-12));
  CHECK(rep.median == doctest::Approx(expected).epsilon(1e-12));
  CHECK_FALSE(rep.centroid);

  // centroid variant: own centroid is 0.5 away, other centroid sqrt(100.25)
  const auto cen = discriminant_ratio(e, true);
  const double expected_cen = std::sqrt(100.25) / 0.5;
  CHECK(cen.centroid);
  CHECK(cen.defined == 4);
  for (double r : cen.ratios) CHECK(r == doctest::Approx(expected_cen).epsilon(1e-12));
}

TEST_CASE("random labels on label-blind geometry center the ratio near one") {
  EmbeddingSet e = random_set(43, 200, 8, 1, 0.0);
  auto g = make_stream(stream_id(43, "relabel"));
  for (std::size_t i = 0; i < e.labels.size(); ++i) e.labels[i] = static_cast<int>(i % 2);
  fisher_yates(e.labels, g);

  const auto rep = discriminant_ratio(e);
  CHECK(rep.defined == 200);
  CHECK(rep.median == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("ratios are invariant under rotation, uniform scaling, and translation") {
  const EmbeddingSet e = random_set(44, 60, 3, 3, 2.5);

  // Rodrigues rotation about axis (1,2,3), angle 0.7, then scale and shift
  double axis[3] = {1.0, 2.0, 3.0};
  const double norm = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  for (double& a : axis) a /= norm;
  const double ct = std::cos(0.7), st = std::sin(0.7);
  double r_mat[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r_mat[i][j] = (1.0 - ct) * axis[i] * axis[j] + (i == j ? ct : 0.0);
  r_mat[0][1] -= st * axis[2];
  r_mat[0][2] += st * axis[1];
  r_mat[1][0] += st * axis[2];
  r_mat[1][2] -= st * axis[0];
  r_mat[2][0] -= st * axis[1];
  r_mat[2][1] += st * axis[0];

  EmbeddingSet moved = e;
  const double shift[3] = {0.3, -1.0, 2.0};
  for (auto& v : moved.vectors) {
    double y[3];
    for (int i = 0; i < 3; ++i)
      y[i] = 3.7 * (r_mat[i][0] * v[0] + r_mat[i][1] * v[1] + r_mat[i][2] * v[2]) + shift[i];
    v = {y[0], y[1], y[2]};
  }

  for (bool centroid : {false, true}) {
    CAPTURE(centroid);
    const auto before = discriminant_ratio(e, centroid);
    const auto after = discriminant_ratio(moved, centroid);
    for (std::size_t i = 0; i < before.ratios.size(); ++i)
      CHECK(std::abs(before.ratios[i] - after.ratios[i]) <=
            1e-9 * std::max(1.0, std::abs(before.ratios[i])));
  }

  // neighbor identity is likewise preserved
  const auto t0 = knn_table(e, 5);
  const auto t1 = knn_table(moved, 5);
  for (std::size_t i = 0; i < t0.size(); ++i)
    for (std::size_t r = 0; r < 5; ++r) CHECK(t0[i][r].index == t1[i][r].index);
}

TEST_CASE("purity sits at the permutation null for random balanced labels") {
  EmbeddingSet e = random_set(45, 400, 4, 1, 0.0);
  for (std::size_t i = 0; i < e.labels.size(); ++i) e.labels[i] = static_cast<int>(i % 2);
  auto g = make_stream(stream_id(45, "relabel"));
  fisher_yates(e.labels, g);

  const double p = neighbor_purity(e, 10);
  // null expectation 199/399 with 3 sigma ~ 0.024; band widened for the
  // dependence between overlapping neighbor pairs
  CHECK(p > 0.45);
  CHECK(p < 0.55);
}

TEST_CASE("singleton classes are undefined and excluded from the summary") {
  const EmbeddingSet e = from_1d({0.0, 0.5, 10.0}, {0, 0, 1});
  const auto rep = discriminant_ratio(e);
  REQUIRE(rep.ratios.size() == 3);
  CHECK(rep.ratios[0] == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(rep.ratios[1] == doctest::Approx(19.0).epsilon(1e-12));
  CHECK(std::isnan(rep.ratios[2]));
  CHECK(rep.defined == 2);
  CHECK(rep.median == doctest::Approx(19.5).epsilon(1e-12));
  CHECK(rep.hist_min == doctest::Approx(19.0).epsilon(1e-12));
  CHECK(rep.hist_max == doctest::Approx(20.0).epsilon(1e-12));
  std::size_t total = 0;
  for (std::size_t c : rep.histogram) total += c;
  CHECK(total == 2);

  EmbeddingSet mono = e;
  mono.labels = {0, 0, 0};
  CHECK_THROWS_AS(discriminant_ratio(mono), ContractError);
}

TEST_CASE("analyze bundles the table, purity, and both ratio definitions") {
  const EmbeddingSet e = random_set(46, 40, 5, 2, 3.0);
  const auto rep = analyze(e, 4);
  CHECK(rep.n == 40);
  CHECK(rep.dim == 5);
  CHECK(rep.k == 4);
  CHECK(rep.knn == knn_table(e, 4));
  CHECK(rep.purity == neighbor_purity(e, 4));
  CHECK(rep.pointwise.ratios == discriminant_ratio(e, false).ratios);
  CHECK(rep.centroid.ratios == discriminant_ratio(e, true).ratios);
}

TEST_CASE("emit_report writes deterministic CSVs and SVGs") {
  EmbeddingSet e = random_set(47, 30, 4, 3, 2.0);
  e.source = "test-run";
  const auto rep = analyze(e, 5);

  const fs::path base = fs::temp_directory_path() / "relic_analysis_report";
  fs::remove_all(base);
  emit_report(rep, (base / "one").string());
  emit_report(rep, (base / "two").string());

  for (const char* name : {"knn.csv", "ratios.csv", "summary.csv", "heatmap.svg",
                           "histogram.svg"}) {
    CAPTURE(name);
    const std::string a = slurp(base / "one" / name);
    CHECK(a == slurp(base / "two" / name));
    CHECK_FALSE(a.empty());
  }

  const std::string knn_csv = slurp(base / "one" / "knn.csv");
  CHECK(count_lines(knn_csv) == 30 * 5 + 1);
  const std::string ratios_csv = slurp(base / "one" / "ratios.csv");
  CHECK(count_lines(ratios_csv) == 30 + 1);
  CHECK(ratios_csv.rfind("point,label,ratio,ratio_centroid\n", 0) == 0);

  const std::string heatmap = slurp(base / "one" / "heatmap.svg");
  CHECK(count_occurrences(heatmap, "<rect") == 30 * 5);

  const std::string summary = slurp(base / "one" / "summary.csv");
  CHECK(count_occurrences(summary, "purity,") == 1);
  CHECK(count_occurrences(summary, "ratio_median,") == 1);
  CHECK(count_occurrences(summary, "ratio_median_centroid,") == 1);
  CHECK(summary.find("source,test-run\n") != std::string::npos);

  // a path that cannot become a directory surfaces as a format error
  std::ofstream blocker(base / "file");
  blocker << "x";
  blocker.close();
  CHECK_THROWS_AS(emit_report(rep, (base / "file" / "sub").string()), FormatError);
  fs::remove_all(base);
}
