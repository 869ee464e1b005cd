#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace llmap {

/// Dense row-major matrix; rows are models (or points), so each row is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct TextRecord {
  std::string text_id;
  std::string category;
  std::int64_t byte_length = 0;  // UTF-8 bytes, >= 1
};

struct ModelRecord {
  std::string model_id;
  std::string model_type;
  std::optional<std::int64_t> param_count;
  std::optional<std::string> created;
  std::set<std::string> tags;
  std::map<std::string, double> benchmark_scores;  // each in [0, 100]
};

/// K x N per-text total log-likelihoods in nats. Entry (i, s) is log p_i(x_s).
struct LogLikMatrix {
  std::vector<ModelRecord> models;
  std::vector<TextRecord> texts;
  Matrix values;

  std::size_t n_models() const { return models.size(); }
  std::size_t n_texts() const { return texts.size(); }
  std::vector<std::string> model_ids() const;
  std::vector<std::string> text_ids() const;

  /// Throws DataError unless shapes agree, K, N >= 1, IDs are unique and every
  /// entry is finite.
  void validate() const;
};

/// Output of double centering. Rows of `xi` and `q` are models, columns texts.
struct ModelCoordinates {
  std::vector<std::string> model_ids;
  std::vector<std::string> text_ids;
  Vector mean_loglik;     // per-model row mean of L
  Matrix xi;              // L minus row means
  Vector column_mean_xi;  // per-text mean of xi over models
  Matrix q;               // xi minus column means

  std::size_t n_models() const { return static_cast<std::size_t>(q.rows()); }
  std::size_t n_texts() const { return static_cast<std::size_t>(q.cols()); }
};

enum class ClipScope { global, per_row };

struct ClipReport {
  double threshold = 0.0;  // global threshold; lowest row threshold for per_row
  double fraction_requested = 0.0;
  std::size_t entries_clipped = 0;
  ClipScope scope = ClipScope::global;
  std::vector<double> row_thresholds;  // per_row scope only
};

}  // namespace llmap
