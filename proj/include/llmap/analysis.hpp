#pragma once

// Standard scores, primary category/task labels, the leakage indicator,
// correlations and the additive error decomposition.

#include <string>
#include <vector>

#include "llmap/types.hpp"

namespace llmap {

/// Column-wise z-scores with the population (1/K) standard deviation.
/// Throws DataError on a constant column.
Matrix standardize_columns(const Matrix& raw);
Vector standardize(const Vector& v);

struct LabelAssignment {
  std::vector<std::string> model_ids;
  std::vector<std::string> labels;
  std::vector<std::string> columns;  // category or task names, in column order
  Matrix z;                          // K x columns standard scores
};

/// Per-model, per-category mean log-likelihood, standardized per category;
/// the label is the argmax, ties going to the category name that sorts first.
/// Categories are taken from the text records.
LabelAssignment primary_category(const LogLikMatrix& matrix);

inline constexpr const char* kAllUnder0 = "AllUnder0";

/// Argmax of task z-scores per model (ties by task order); kAllUnder0 when
/// every z-score is below zero.
LabelAssignment primary_task(const Matrix& scores, const std::vector<std::string>& task_names,
                             std::vector<std::string> model_ids = {});

struct LeakageReport {
  Vector per_model;                  // z(mean_loglik) - z(bench_mean)
  std::vector<std::size_t> flagged;  // indices with per_model > threshold
  double threshold = 1.0;
};

LeakageReport leakage_scores(const Vector& mean_loglik, const Vector& bench_mean, double threshold = 1.0);

struct CorrelationReport {
  double pearson_r = 0.0;
  double spearman_rho = 0.0;
  std::size_t n = 0;
};

/// Ranks starting at 1; tied values share the mean of their ranks.
Vector average_ranks(const Vector& v);
double pearson(const Vector& a, const Vector& b);
CorrelationReport correlations(const Vector& pred, const Vector& actual);

/// eps_is = a + b_i + c_s + d_is with sum(b) = sum(c) = 0 and zero row and
/// column sums in d.
struct ErrorDecomposition {
  double a = 0.0;
  Vector b;
  Vector c;
  Matrix d;
};

ErrorDecomposition decompose_error(const Matrix& eps);

}  // namespace llmap
