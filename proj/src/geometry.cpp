#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "llmap/error.hpp"
#include "llmap/geometry.hpp"
#include "llmap/kernels.hpp"
#include "llmap/matrix_core.hpp"

namespace llmap {

std::string_view unit_name(DivergenceUnit unit) {
  return unit == DivergenceUnit::nats_per_text ? "nats_per_text" : "bits_per_byte";
}

DivergenceUnit parse_unit(std::string_view name) {
  if (name == "nats_per_text") return DivergenceUnit::nats_per_text;
  if (name == "bits_per_byte") return DivergenceUnit::bits_per_byte;
  throw ConfigError("unknown unit '" + std::string(name) + "' (nats_per_text|bits_per_byte)");
}

DivergenceMatrix kl_matrix(const ModelCoordinates& coords) {
  const auto n = coords.q.cols();
  if (n < 2) throw DataError("KL estimation needs at least 2 texts");
  DivergenceMatrix out;
  out.model_ids = coords.model_ids;
  out.values = kernels::parallel::pairwise_sq_dist(coords.q) / (2.0 * static_cast<double>(n));
  out.unit = DivergenceUnit::nats_per_text;
  return out;
}

double bits_per_byte_factor(double mean_text_bytes) {
  if (!(mean_text_bytes > 0.0) || !std::isfinite(mean_text_bytes)) {
    throw ConfigError("mean_text_bytes must be positive");
  }
  return 1.0 / (mean_text_bytes * std::numbers::ln2);
}

DivergenceMatrix to_bits_per_byte(const DivergenceMatrix& div, double mean_text_bytes) {
  if (div.unit != DivergenceUnit::nats_per_text) {
    throw ConfigError("bits-per-byte conversion expects nats_per_text input");
  }
  DivergenceMatrix out = div;
  out.values *= bits_per_byte_factor(mean_text_bytes);
  out.unit = DivergenceUnit::bits_per_byte;
  out.mean_text_bytes = mean_text_bytes;
  return out;
}

double mean_text_bytes(const LogLikMatrix& matrix) {
  if (matrix.texts.empty()) throw DataError("no texts");
  double total = 0.0;
  for (const auto& t : matrix.texts) total += static_cast<double>(t.byte_length);
  return total / static_cast<double>(matrix.texts.size());
}

NeighborTable nearest_neighbors(const DivergenceMatrix& div, std::string_view query, std::size_t k) {
  const auto& ids = div.model_ids;
  const auto it = std::find(ids.begin(), ids.end(), query);
  if (it == ids.end()) throw ConfigError("unknown query model '" + std::string(query) + "'");
  if (k < 1 || k + 1 > ids.size()) {
    throw ConfigError("neighbor count must be in [1, " + std::to_string(ids.size() - 1) + "]");
  }
  const auto qi = static_cast<std::size_t>(it - ids.begin());
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (j != qi) order.push_back(j);
  }
  const auto row = div.values.row(static_cast<Eigen::Index>(qi));
  auto less = [&](std::size_t a, std::size_t b) {
    const double da = row(static_cast<Eigen::Index>(a));
    const double db = row(static_cast<Eigen::Index>(b));
    if (da != db) return da < db;
    return ids[a] < ids[b];
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
  NeighborTable table;
  table.query_id = std::string(query);
  for (std::size_t r = 0; r < k; ++r) {
    table.neighbors.push_back({ids[order[r]], row(static_cast<Eigen::Index>(order[r]))});
  }
  return table;
}

std::string format_neighbors(const std::vector<NeighborTable>& tables, DivergenceUnit unit) {
  std::string out = "query_id\trank\tneighbor_id\tdivergence\tunit\n";
  for (const auto& t : tables) {
    for (std::size_t r = 0; r < t.neighbors.size(); ++r) {
      out += t.query_id + '\t' + std::to_string(r + 1) + '\t' + t.neighbors[r].model_id + '\t' +
             format_double(t.neighbors[r].divergence) + '\t' + std::string(unit_name(unit)) + '\n';
    }
  }
  return out;
}

std::string format_divergence(const DivergenceMatrix& div) {
  return format_table(div.model_ids, div.model_ids, div.values);
}

HeightDecomposition decompose(const ModelCoordinates& coords) {
  const auto k = coords.q.rows();
  const auto n = coords.q.cols();
  Matrix ell(k, n);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index s = 0; s < n; ++s) {
      ell(i, s) = coords.mean_loglik(i) + coords.column_mean_xi(s) + coords.q(i, s);
    }
  }
  HeightDecomposition out;
  out.model_ids = coords.model_ids;
  out.height = coords.mean_loglik * std::sqrt(static_cast<double>(n));
  out.horizontal_sq = kernels::parallel::pairwise_sq_dist(coords.q);
  out.total_sq = kernels::parallel::pairwise_sq_dist(ell);
  return out;
}

}  // namespace llmap
