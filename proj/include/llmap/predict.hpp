#pragma once

// Ridge regression from model coordinates to benchmark scores, with grouped
// k-fold cross-validation and inner-CV selection of the penalty.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "llmap/analysis.hpp"
#include "llmap/types.hpp"

namespace llmap {

struct RidgeModel {
  Vector weights;
  double intercept = 0.0;
  double alpha = 0.0;
};

/// Minimizes ||y - Xw - b||^2 + alpha ||w||^2 with b unpenalized (b = 0 when
/// fit_intercept is false), through the n x n dual system
/// (Xc Xc^T + alpha I) a = yc, w = Xc^T a. Cholesky, with diagonal jitter
/// added if the factorization fails.
RidgeModel fit_ridge(const Matrix& x, const Vector& y, double alpha, bool fit_intercept = true);
Vector predict(const RidgeModel& model, const Matrix& x);

std::vector<double> benchmark_alpha_grid();  // 1e1 .. 1e9
std::vector<double> loglik_alpha_grid();     // 1e-4 .. 1e4

struct FoldPlan {
  std::vector<std::size_t> fold;  // fold index per row
  std::size_t n_folds = 0;
  bool grouped = true;
};

/// Distinct labels (sorted) are shuffled by Fisher-Yates with SplitMix64(seed),
/// stable-sorted by size descending, and each is placed in the fold with the
/// fewest rows so far (lowest index on ties).
FoldPlan group_kfold(const std::vector<std::string>& groups, std::size_t n_folds, std::uint64_t seed);
/// Every row is its own group.
FoldPlan random_kfold(std::size_t n, std::size_t n_folds, std::uint64_t seed);

/// Structural checks: every row in a valid fold, no empty fold, no label in two
/// folds (grouped plans) and fold sizes within the allowed spread. Returns a
/// description of each violation; empty means the plan is sound.
std::vector<std::string> audit_fold_plan(const FoldPlan& plan, const std::vector<std::string>& groups);

struct PredictionTask {
  std::string target_name;
  Matrix features;  // K x N
  Vector target;    // length K
  std::vector<std::string> groups;
  std::vector<double> alpha_grid;
  std::size_t n_folds = 5;
  std::size_t inner_folds = 5;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::optional<std::pair<double, double>> clip_range;
  bool grouped = true;
  bool fit_intercept = true;

  void validate() const;
};

struct CrossValResult {
  Vector predicted;  // mean over seeds
  Matrix per_seed;   // seeds x K
  std::vector<FoldPlan> plans;
  std::vector<std::vector<double>> selected_alpha;  // [seed][fold]
  CorrelationReport overall;
  std::vector<CorrelationReport> per_seed_report;
  std::size_t inner_fallbacks = 0;  // outer folds whose inner CV could not be grouped
};

/// For each seed and outer fold: choose alpha by inner CV on the training rows
/// (same grouping, mean of per-fold MSE, first minimum in grid order), refit,
/// predict the held-out rows and clip. Final predictions average the seeds.
CrossValResult cross_val_predict(const PredictionTask& task);

inline const std::vector<std::string>& benchmark_tasks() {
  static const std::vector<std::string> tasks{"ARC", "HellaSwag", "MMLU", "TruthfulQA", "Winogrande", "GSM8K"};
  return tasks;
}

struct TargetSelection {
  std::vector<std::size_t> rows;  // models that have the target
  Vector values;
  bool is_benchmark = true;
};

/// One of the six tasks, "6-TaskMean" (mean of all six, only for models that
/// have every task) or "mean_loglik" (row mean of the matrix).
TargetSelection select_target(const LogLikMatrix& matrix, const std::string& name);

std::string format_predictions(const std::vector<std::string>& model_ids, const std::string& target_name,
                               const CrossValResult& result, const Vector& actual);

}  // namespace llmap
