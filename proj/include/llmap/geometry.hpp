#pragma once

// Pairwise KL estimates from q-coordinates, unit conversion, neighbor tables
// and the height/horizontal split of l-space distances.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "llmap/types.hpp"

namespace llmap {

enum class DivergenceUnit { nats_per_text, bits_per_byte };

std::string_view unit_name(DivergenceUnit unit);
DivergenceUnit parse_unit(std::string_view name);

/// K x K estimated KL(p_i, p_j). Symmetric, zero diagonal, non-negative.
struct DivergenceMatrix {
  std::vector<std::string> model_ids;
  Matrix values;
  DivergenceUnit unit = DivergenceUnit::nats_per_text;
  std::optional<double> mean_text_bytes;
};

/// KL estimate ||q_i - q_j||^2 / (2N) in nats per text. Requires N >= 2.
DivergenceMatrix kl_matrix(const ModelCoordinates& coords);

/// 1 / (mean_text_bytes * ln 2).
double bits_per_byte_factor(double mean_text_bytes);
DivergenceMatrix to_bits_per_byte(const DivergenceMatrix& div, double mean_text_bytes);

/// Average byte_length over the texts of a matrix.
double mean_text_bytes(const LogLikMatrix& matrix);

struct Neighbor {
  std::string model_id;
  double divergence = 0.0;
};

struct NeighborTable {
  std::string query_id;
  std::vector<Neighbor> neighbors;  // ascending divergence, ties by model_id
};

NeighborTable nearest_neighbors(const DivergenceMatrix& div, std::string_view query, std::size_t k);

/// TSV with header "query_id\trank\tneighbor_id\tdivergence\tunit"; ranks start at 1.
std::string format_neighbors(const std::vector<NeighborTable>& tables, DivergenceUnit unit);
std::string format_divergence(const DivergenceMatrix& div);

/// ||l_i - l_j||^2 = ||q_i - q_j||^2 + (h_i - h_j)^2 with h_i = sqrt(N) * mean_i.
struct HeightDecomposition {
  std::vector<std::string> model_ids;
  Vector height;
  Matrix horizontal_sq;
  Matrix total_sq;
};

/// total_sq is measured on l reconstructed element-wise as mean_i + xibar_s + q_is.
HeightDecomposition decompose(const ModelCoordinates& coords);

}  // namespace llmap
