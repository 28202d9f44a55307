#include "relic/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "relic/errors.hpp"

namespace relic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_set(const EmbeddingSet& emb) {
  if (emb.size() < 2) throw ContractError("analysis: need at least two embeddings");
  if (emb.labels.size() != emb.size())
    throw ContractError("analysis: labels and vectors disagree in length");
  const std::size_t d = emb.vectors.front().size();
  if (d == 0) throw ContractError("analysis: zero-width embeddings");
  for (const auto& v : emb.vectors)
    if (v.size() != d) throw ContractError("analysis: embedding rows disagree in width");
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  return std::sqrt(squared_distance(a, b));
}

// Median, histogram, and count over the finite entries of `ratios`.
void summarize(DiscriminantReport& rep) {
  std::vector<double> defined;
  for (double r : rep.ratios)
    if (std::isfinite(r)) defined.push_back(r);
  rep.defined = defined.size();
  rep.histogram.assign(kHistogramBins, 0);
  if (defined.empty()) {
    rep.median = kNaN;
    rep.hist_min = rep.hist_max = 0.0;
    return;
  }
  std::sort(defined.begin(), defined.end());
  const std::size_t n = defined.size();
  rep.median = n % 2 == 1 ? defined[n / 2] : 0.5 * (defined[n / 2 - 1] + defined[n / 2]);
  rep.hist_min = defined.front();
  rep.hist_max = defined.back();
  const double width = (rep.hist_max - rep.hist_min) / static_cast<double>(kHistogramBins);
  for (double r : defined) {
    std::size_t bin = 0;
    if (width > 0.0)
      bin = std::min(kHistogramBins - 1,
                     static_cast<std::size_t>((r - rep.hist_min) / width));
    ++rep.histogram[bin];
  }
}

std::map<int, std::size_t> class_counts(const EmbeddingSet& emb) {
  std::map<int, std::size_t> counts;
  for (int l : emb.labels) ++counts[l];
  if (counts.size() < 2) throw ContractError("analysis: need at least two distinct classes");
  return counts;
}

// 256-step ramp through five anchor colors, dark violet to yellow, linearly
// interpolated in sRGB. Index clamped to [0, 255].
void ramp_color(double t, char out[8]) {
  static constexpr int anchors[5][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  const int step = std::clamp(static_cast<int>(t * 255.0), 0, 255);
  const double pos = static_cast<double>(step) / 255.0 * 4.0;
  const int seg = std::min(3, static_cast<int>(pos));
  const double frac = pos - seg;
  int rgb[3];
  for (int c = 0; c < 3; ++c)
    rgb[c] = static_cast<int>(std::lround(anchors[seg][c] +
                                          frac * (anchors[seg + 1][c] - anchors[seg][c])));
  std::snprintf(out, 8, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("report: cannot open " + p.string());
  return f;
}

}  // namespace

std::vector<std::vector<Neighbor>> knn_table(const EmbeddingSet& emb, std::size_t k) {
  check_set(emb);
  const std::size_t n = emb.size();
  if (k == 0) throw ConfigError("knn_table: k must be positive");
  if (k >= n) throw ConfigError("knn_table: k must be smaller than the number of points");

  std::vector<std::vector<Neighbor>> table(n);
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    order.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) order.emplace_back(squared_distance(emb.vectors[i], emb.vectors[j]), j);
    std::sort(order.begin(), order.end());  // pair ordering = (distance, index)
    table[i].reserve(k);
    for (std::size_t r = 0; r < k; ++r)
      table[i].push_back(Neighbor{order[r].second, std::sqrt(order[r].first)});
  }
  return table;
}

DiscriminantReport discriminant_ratio(const EmbeddingSet& emb, bool centroid) {
  check_set(emb);
  const auto counts = class_counts(emb);
  const std::size_t n = emb.size();
  DiscriminantReport rep;
  rep.centroid = centroid;
  rep.ratios.assign(n, kNaN);

  if (!centroid) {
    for (std::size_t i = 0; i < n; ++i) {
      const int own = emb.labels[i];
      if (counts.at(own) < 2) continue;  // singleton class: undefined
      double within = 0.0, between = 0.0;
      std::size_t n_within = 0, n_between = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = distance(emb.vectors[i], emb.vectors[j]);
        if (emb.labels[j] == own) {
          within += d;
          ++n_within;
        } else {
          between += d;
          ++n_between;
        }
      }
      const double ratio = (between / static_cast<double>(n_between)) /
                           (within / static_cast<double>(n_within));
      rep.ratios[i] = std::isfinite(ratio) ? ratio : kNaN;
    }
  } else {
    const std::size_t d = emb.vectors.front().size();
    std::map<int, std::vector<double>> centroids;
    for (const auto& [label, count] : counts) centroids[label].assign(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& c = centroids[emb.labels[i]];
      for (std::size_t j = 0; j < d; ++j) c[j] += emb.vectors[i][j];
    }
    for (auto& [label, c] : centroids)
      for (double& v : c) v /= static_cast<double>(counts.at(label));

    for (std::size_t i = 0; i < n; ++i) {
      const int own = emb.labels[i];
      const double within = distance(emb.vectors[i], centroids.at(own));
      double between = 0.0;
      std::size_t others = 0;
      for (const auto& [label, c] : centroids) {
        if (label == own) continue;
        between += distance(emb.vectors[i], c);
        ++others;
      }
      const double ratio = (between / static_cast<double>(others)) / within;
      rep.ratios[i] = std::isfinite(ratio) ? ratio : kNaN;
    }
  }

  summarize(rep);
  return rep;
}

double neighbor_purity(const EmbeddingSet& emb, std::size_t k) {
  const auto table = knn_table(emb, k);
  std::size_t same = 0;
  for (std::size_t i = 0; i < table.size(); ++i)
    for (const Neighbor& nb : table[i]) same += emb.labels[nb.index] == emb.labels[i];
  return static_cast<double>(same) / static_cast<double>(table.size() * k);
}

AnalysisReport analyze(const EmbeddingSet& emb, std::size_t k) {
  AnalysisReport rep;
  rep.knn = knn_table(emb, k);
  rep.n = emb.size();
  rep.dim = emb.vectors.front().size();
  rep.k = k;
  rep.source = emb.source;
  rep.labels = emb.labels;
  std::size_t same = 0;
  for (std::size_t i = 0; i < rep.n; ++i)
    for (const Neighbor& nb : rep.knn[i]) same += emb.labels[nb.index] == emb.labels[i];
  rep.purity = static_cast<double>(same) / static_cast<double>(rep.n * k);
  rep.pointwise = discriminant_ratio(emb, false);
  rep.centroid = discriminant_ratio(emb, true);
  return rep;
}

void emit_report(const AnalysisReport& report, const std::string& out_dir) {
  const std::filesystem::path dir(out_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError("report: cannot create directory " + out_dir + ": " + ec.message());

  char buf[256];

  {
    auto f = open_out(dir / "knn.csv");
    f << "point,rank,neighbor,distance,same_label\n";
    for (std::size_t i = 0; i < report.n; ++i)
      for (std::size_t r = 0; r < report.k; ++r) {
        const Neighbor& nb = report.knn[i][r];
        const int same = report.labels[nb.index] == report.labels[i];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%d\n", i, r, nb.index, nb.distance,
                      same);
        f << buf;
      }
  }

  {
    auto f = open_out(dir / "ratios.csv");
    f << "point,label,ratio,ratio_centroid\n";
    for (std::size_t i = 0; i < report.n; ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g\n", i, report.labels[i],
                    report.pointwise.ratios[i], report.centroid.ratios[i]);
      f << buf;
    }
  }

  {
    auto f = open_out(dir / "summary.csv");
    f << "metric,value\n";
    std::snprintf(buf, sizeof buf, "n,%zu\ndim,%zu\nk,%zu\n", report.n, report.dim, report.k);
    f << buf;
    std::snprintf(buf, sizeof buf, "purity,%.17g\n", report.purity);
    f << buf;
    std::snprintf(buf, sizeof buf, "ratio_median,%.17g\nratio_defined,%zu\n",
                  report.pointwise.median, report.pointwise.defined);
    f << buf;
    std::snprintf(buf, sizeof buf, "ratio_median_centroid,%.17g\nratio_defined_centroid,%zu\n",
                  report.centroid.median, report.centroid.defined);
    f << buf;
    f << "source," << report.source << "\n";
  }

  {
    auto f = open_out(dir / "heatmap.svg");
    constexpr int cell = 8;
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -std::numeric_limits<double>::infinity();
    for (const auto& row : report.knn)
      for (const Neighbor& nb : row) {
        dmin = std::min(dmin, nb.distance);
        dmax = std::max(dmax, nb.distance);
      }
    const double span = dmax - dmin;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%zu\" height=\"%zu\">\n",
                  report.k * cell, report.n * cell);
    f << buf;
    char color[8];
    for (std::size_t i = 0; i < report.n; ++i)
      for (std::size_t r = 0; r < report.k; ++r) {
        const Neighbor& nb = report.knn[i][r];
        const double t = span > 0.0 ? (nb.distance - dmin) / span : 0.0;
        ramp_color(t, color);
        const bool cross = report.labels[nb.index] != report.labels[i];
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%zu\" y=\"%zu\" width=\"%d\" height=\"%d\" fill=\"%s\"%s/>\n",
                      r * cell, i * cell, cell, cell, color,
                      cross ? " stroke=\"#d62728\" stroke-width=\"1\"" : "");
        f << buf;
      }
    f << "</svg>\n";
  }

  {
    auto f = open_out(dir / "histogram.svg");
    constexpr int bar_w = 16, plot_h = 200, margin = 24;
    const auto& hist = report.pointwise.histogram;
    const std::size_t peak = std::max<std::size_t>(
        1, *std::max_element(hist.begin(), hist.end()));
    const std::size_t width = hist.size() * bar_w + 2 * margin;
    const std::size_t height = plot_h + 2 * margin;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%zu\" height=\"%zu\">\n",
                  width, height);
    f << buf;
    char color[8];
    for (std::size_t b = 0; b < hist.size(); ++b) {
      const int h = static_cast<int>(std::lround(
          static_cast<double>(hist[b]) / static_cast<double>(peak) * plot_h));
      ramp_color(static_cast<double>(b) / static_cast<double>(hist.size() - 1), color);
      std::snprintf(buf, sizeof buf,
                    "<rect x=\"%zu\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"%s\"/>\n",
                    margin + b * bar_w, margin + plot_h - h, bar_w, h, color);
      f << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%zu\" y2=\"%d\" stroke=\"#000000\"/>\n", margin,
                  margin + plot_h, margin + hist.size() * bar_w, margin + plot_h);
    f << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" font-size=\"10\">%.4f</text>\n",
                  margin, margin + plot_h + 12, report.pointwise.hist_min);
    f << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%zu\" y=\"%d\" font-size=\"10\" text-anchor=\"end\">%.4f</text>\n",
                  margin + hist.size() * bar_w, margin + plot_h + 12, report.pointwise.hist_max);
    f << buf;
    f << "</svg>\n";
  }
}

}  // namespace relic
