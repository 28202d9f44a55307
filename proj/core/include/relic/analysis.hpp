#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace relic {

// Representations under the microscope: N rows of equal width plus the class
// id of each row. `source` is a free-form provenance note copied into
// reports (keep it free of commas and newlines; it lands in a CSV cell).
struct EmbeddingSet {
  std::vector<std::vector<double>> vectors;
  std::vector<int> labels;
  std::string source;

  std::size_t size() const { return vectors.size(); }
};

struct Neighbor {
  std::size_t index;
  double distance;

  bool operator==(const Neighbor&) const = default;
};

// Exact k-nearest-neighbor table under Euclidean distance. Self is never its
// own neighbor; equal distances break toward the lower index; each row is
// sorted ascending by (distance, index). Requires 1 <= k < N (ConfigError
// otherwise) and a well-formed set: N >= 2, labels matching vectors, all rows
// the same width (ContractError otherwise).
std::vector<std::vector<Neighbor>> knn_table(const EmbeddingSet& emb, std::size_t k);

// Per-point class-separation ratios plus distribution summaries. A point's
// ratio is NaN ("undefined") when it cannot be computed -- singleton class in
// the pointwise definition, zero own-distance in either -- and undefined or
// non-finite ratios are excluded from the median and histogram.
struct DiscriminantReport {
  std::vector<double> ratios;  // one per point, NaN where undefined
  std::size_t defined = 0;     // finite entries contributing to the summary
  double median = 0.0;         // NaN when nothing is defined
  bool centroid = false;       // which definition produced this report

  // Fixed-width histogram over the defined ratios: `bins` counts spanning
  // [hist_min, hist_max]; a degenerate span puts everything in bin 0.
  std::vector<std::size_t> histogram;
  double hist_min = 0.0;
  double hist_max = 0.0;
};

inline constexpr std::size_t kHistogramBins = 32;

// Pointwise definition (centroid = false): for each point, mean distance to
// every point of other classes divided by mean distance to the other points
// of its own class. Centroid definition (centroid = true): mean distance to
// the other classes' centroids divided by distance to the own-class centroid
// (computed including the point). Ratios of distances make both definitions
// invariant under global rotation and uniform scaling. Fewer than two
// distinct labels is a ContractError; singleton classes only mark their own
// points undefined.
DiscriminantReport discriminant_ratio(const EmbeddingSet& emb, bool centroid = false);

// Fraction of (point, neighbor) pairs sharing a label over all N*k pairs of
// the k-NN table. Preconditions as knn_table.
double neighbor_purity(const EmbeddingSet& emb, std::size_t k);

// Everything emit_report needs, computed once.
struct AnalysisReport {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::size_t k = 0;
  std::string source;
  std::vector<int> labels;
  std::vector<std::vector<Neighbor>> knn;
  double purity = 0.0;
  DiscriminantReport pointwise;
  DiscriminantReport centroid;
};

AnalysisReport analyze(const EmbeddingSet& emb, std::size_t k);

// Writes the report into `out_dir` (created if missing):
//   knn.csv       - point,rank,neighbor,distance,same_label (N*k rows)
//   ratios.csv    - point,label,ratio,ratio_centroid (N rows; "nan" when
//                   undefined)
//   summary.csv   - metric,value pairs (counts, purity, medians, source)
//   heatmap.svg   - N-by-k neighbor grid, fill from a fixed 256-step color
//                   ramp over normalized distance, cross-class cells outlined
//   histogram.svg - the pointwise ratio histogram
// All numeric formatting is fixed, so identical inputs produce byte-identical
// files. I/O failures raise FormatError naming the path.
void emit_report(const AnalysisReport& report, const std::string& out_dir);

}  // namespace relic
