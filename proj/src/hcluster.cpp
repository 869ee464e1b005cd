#include <algorithm>
#include <cmath>
#include <tuple>

#include "llmap/error.hpp"
#include "llmap/kernels.hpp"
#include "llmap/mapping.hpp"

namespace llmap {

ClusterMetric parse_metric(std::string_view name) {
  if (name == "sqeuclidean") return ClusterMetric::sqeuclidean;
  if (name == "correlation") return ClusterMetric::correlation;
  throw ConfigError("unknown metric '" + std::string(name) + "' (sqeuclidean|correlation)");
}

Linkage parse_linkage(std::string_view name) {
  if (name == "median") return Linkage::median;
  if (name == "average") return Linkage::average;
  throw ConfigError("unknown linkage '" + std::string(name) + "' (median|average)");
}

std::string_view metric_name(ClusterMetric m) {
  return m == ClusterMetric::sqeuclidean ? "sqeuclidean" : "correlation";
}

std::string_view linkage_name(Linkage l) { return l == Linkage::median ? "median" : "average"; }

Matrix correlation_distance(const Matrix& x) {
  const auto k = x.rows();
  const auto n = x.cols();
  Matrix z(k, n);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double mean = x.row(i).sum() / static_cast<double>(n);
    const auto c = x.row(i).array() - mean;
    const double norm = std::sqrt((c * c).sum());
    if (!(norm > 0.0)) throw DataError("correlation distance is undefined for constant row " + std::to_string(i));
    z.row(i) = c / norm;
  }
  Matrix d = Matrix::Ones(k, k) - kernels::parallel::gram(z);
  for (Eigen::Index i = 0; i < k; ++i) d(i, i) = 0.0;
  return d;
}

Dendrogram hcluster(const Matrix& x, ClusterMetric metric, Linkage linkage, std::vector<std::string> leaves) {
  const auto k = static_cast<std::size_t>(x.rows());
  if (k < 2) throw DataError("clustering needs at least 2 rows");
  if (!x.allFinite()) throw DataError("clustering input contains non-finite values");
  Matrix d = metric == ClusterMetric::sqeuclidean ? kernels::parallel::pairwise_sq_dist(x)
                                                  : correlation_distance(x);

  std::vector<std::size_t> node(k);
  std::vector<std::size_t> size(k, 1);
  std::vector<bool> active(k, true);
  for (std::size_t i = 0; i < k; ++i) node[i] = i;

  Dendrogram out;
  out.leaves = std::move(leaves);
  out.metric = metric;
  out.linkage = linkage;
  out.height_unit = metric == ClusterMetric::sqeuclidean ? "squared_euclidean" : "one_minus_pearson";

  for (std::size_t m = 0; m + 1 < k; ++m) {
    std::size_t best_a = k;
    std::size_t best_b = k;
    std::tuple<double, std::size_t, std::size_t> best{};
    for (std::size_t a = 0; a < k; ++a) {
      if (!active[a]) continue;
      for (std::size_t b = a + 1; b < k; ++b) {
        if (!active[b]) continue;
        const auto lo = std::min(node[a], node[b]);
        const auto hi = std::max(node[a], node[b]);
        const std::tuple<double, std::size_t, std::size_t> key{d(Eigen::Index(a), Eigen::Index(b)), lo, hi};
        if (best_a == k || key < best) {
          best = key;
          best_a = a;
          best_b = b;
        }
      }
    }
    const auto a = static_cast<Eigen::Index>(best_a);
    const auto b = static_cast<Eigen::Index>(best_b);
    const double dab = d(a, b);
    const double na = static_cast<double>(size[best_a]);
    const double nb = static_cast<double>(size[best_b]);
    for (std::size_t c = 0; c < k; ++c) {
      if (!active[c] || c == best_a || c == best_b) continue;
      const auto ci = static_cast<Eigen::Index>(c);
      double updated = 0.0;
      if (linkage == Linkage::average) {
        updated = (na * d(ci, a) + nb * d(ci, b)) / (na + nb);
      } else {
        updated = 0.5 * d(ci, a) + 0.5 * d(ci, b) - 0.25 * dab;
      }
      d(ci, a) = updated;
      d(a, ci) = updated;
    }
    // Rounding can push a median-linkage distance a hair below zero.
    out.merges.push_back({std::get<1>(best), std::get<2>(best), std::max(dab, 0.0), size[best_a] + size[best_b]});
    node[best_a] = k + m;
    size[best_a] += size[best_b];
    active[best_b] = false;
  }
  return out;
}

Matrix kl_scaled_rows(const ModelCoordinates& coords) {
  const double n = static_cast<double>(coords.q.cols());
  return coords.q / std::sqrt(2.0 * n);
}

}  // namespace llmap
