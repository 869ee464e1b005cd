#pragma once

// Model maps: PCA, exact t-SNE, agglomerative clustering and the tour-based
// hue ordering used to colour categories.

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "llmap/types.hpp"

namespace llmap {

struct EmbeddingResult {
  std::vector<std::string> model_ids;
  Matrix coords;  // K x dims (2 for maps)
  std::string method;
  std::uint64_t seed = 0;
  std::map<std::string, double> params;
};

struct SpectrumReport {
  std::vector<double> singular_values;   // descending, all min(K, N)
  std::vector<double> cumulative_ratio;  // of squared singular values, ends at 1
};

struct PcaResult {
  EmbeddingResult embedding;
  SpectrumReport spectrum;
  Matrix components;  // dims x N, rows are unit right singular vectors
  Vector column_mean;
};

/// Column-centers `x` and projects onto its top `dims` right singular vectors.
/// Each component is signed so that its largest-magnitude loading is positive
/// (the first such loading when several tie).
PcaResult pca(const Matrix& x, std::size_t dims, std::vector<std::string> model_ids = {});

struct TsneParams {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  std::uint64_t seed = 0;
};

struct Affinities {
  Matrix conditional;           // row i holds p_{j|i}
  Vector perplexity;            // achieved exp(H_i) per row
  Vector beta;                  // precision 1 / (2 sigma_i^2)
};

/// Per-row bisection on beta (50 steps, entropy tolerance 1e-5) so that each
/// conditional distribution over the other points has the target perplexity.
Affinities tsne_affinities(const Matrix& x, double perplexity);

/// Exact t-SNE to two dimensions. Exaggeration and momentum 0.5 apply during
/// the first quarter of the iterations, momentum 0.8 afterwards. Initial layout
/// is N(0, 1e-4^2) drawn from SplitMix64(seed) in row-major order. The step is
/// learning_rate * gain * g with g = sum_j (P_ij - Q_ij)(1 + |y_i - y_j|^2)^-1 (y_i - y_j),
/// i.e. the KL gradient without its factor 4.
EmbeddingResult tsne(const Matrix& x, const TsneParams& params, std::vector<std::string> model_ids = {});

enum class ClusterMetric { sqeuclidean, correlation };
enum class Linkage { median, average };

ClusterMetric parse_metric(std::string_view name);
Linkage parse_linkage(std::string_view name);
std::string_view metric_name(ClusterMetric m);
std::string_view linkage_name(Linkage l);

struct Merge {
  std::size_t left = 0;   // node IDs: leaves are 0..K-1, merge m creates K+m
  std::size_t right = 0;
  double height = 0.0;
  std::size_t size = 0;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
  ClusterMetric metric = ClusterMetric::sqeuclidean;
  Linkage linkage = Linkage::average;
  std::string height_unit;
};

/// Agglomerative clustering with Lance-Williams updates on the full distance
/// matrix. Each step merges the closest pair, ties broken by the smaller
/// (lower node ID, higher node ID) pair.
Dendrogram hcluster(const Matrix& x, ClusterMetric metric, Linkage linkage,
                    std::vector<std::string> leaves = {});

/// 1 - Pearson correlation between rows. Throws DataError on a constant row.
Matrix correlation_distance(const Matrix& x);

/// q / sqrt(2N): squared row distances equal the nats-per-text KL estimate.
Matrix kl_scaled_rows(const ModelCoordinates& coords);

double tour_length(const Matrix& points, const std::vector<std::size_t>& tour);
/// Greedy tour from index 0; ties go to the smaller index.
std::vector<std::size_t> nearest_neighbor_tour(const Matrix& points);
/// First-improvement 2-opt; a move is taken when it shortens the tour by more
/// than 1e-12. Returns a tour on which no such move exists.
std::vector<std::size_t> two_opt(const Matrix& points, std::vector<std::size_t> tour);
/// Nearest-neighbor tour refined by 2-opt.
std::vector<std::size_t> tsp_hue_order(const Matrix& points);
/// Hue in degrees per point, 360 * position / n along the tour.
std::vector<double> tour_hues(const std::vector<std::size_t>& tour);

std::string format_embedding(const EmbeddingResult& e);
std::string format_spectrum(const SpectrumReport& s);
std::string format_dendrogram(const Dendrogram& d);

}  // namespace llmap
