#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "llmap/analysis.hpp"
#include "llmap/error.hpp"
#include "llmap/kernels.hpp"

namespace llmap {

Vector standardize(const Vector& v) {
  const auto n = static_cast<double>(v.size());
  if (v.size() < 1) throw DataError("cannot standardize an empty vector");
  const double mean = v.sum() / n;
  const double var = (v.array() - mean).square().sum() / n;
  if (!(var > 0.0)) throw DataError("cannot standardize a constant vector");
  return (v.array() - mean) / std::sqrt(var);
}

Matrix standardize_columns(const Matrix& raw) {
  Matrix z(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    try {
      z.col(c) = standardize(raw.col(c));
    } catch (const DataError&) {
      throw DataError("column " + std::to_string(c) + " is constant");
    }
  }
  return z;
}

namespace {

// Index of the largest entry; the first one wins a tie.
Eigen::Index argmax_first(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < row.size(); ++c) {
    if (row(c) > row(best)) best = c;
  }
  return best;
}

}  // namespace

LabelAssignment primary_category(const LogLikMatrix& matrix) {
  std::map<std::string, std::vector<Eigen::Index>> by_category;
  for (std::size_t s = 0; s < matrix.texts.size(); ++s) {
    const auto& cat = matrix.texts[s].category;
    if (cat.empty()) throw DataError("text '" + matrix.texts[s].text_id + "' has no category");
    by_category[cat].push_back(static_cast<Eigen::Index>(s));
  }
  LabelAssignment out;
  out.model_ids = matrix.model_ids();
  const auto k = matrix.values.rows();
  Matrix means(k, static_cast<Eigen::Index>(by_category.size()));
  Eigen::Index c = 0;
  for (const auto& [name, cols] : by_category) {
    out.columns.push_back(name);
    for (Eigen::Index i = 0; i < k; ++i) {
      double s = 0.0;
      for (auto col : cols) s += matrix.values(i, col);
      means(i, c) = s / static_cast<double>(cols.size());
    }
    ++c;
  }
  if (out.columns.size() == 1) {
    out.z = Matrix::Zero(k, 1);
    out.labels.assign(static_cast<std::size_t>(k), out.columns[0]);
    return out;
  }
  out.z = standardize_columns(means);
  for (Eigen::Index i = 0; i < k; ++i) out.labels.push_back(out.columns[std::size_t(argmax_first(out.z.row(i)))]);
  return out;
}

LabelAssignment primary_task(const Matrix& scores, const std::vector<std::string>& task_names,
                             std::vector<std::string> model_ids) {
  if (static_cast<std::size_t>(scores.cols()) != task_names.size()) {
    throw DataError("task name count does not match score columns");
  }
  LabelAssignment out;
  out.model_ids = std::move(model_ids);
  out.columns = task_names;
  out.z = standardize_columns(scores);
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const auto row = out.z.row(i);
    if ((row.array() < 0.0).all()) {
      out.labels.emplace_back(kAllUnder0);
    } else {
      out.labels.push_back(task_names[std::size_t(argmax_first(row))]);
    }
  }
  return out;
}

LeakageReport leakage_scores(const Vector& mean_loglik, const Vector& bench_mean, double threshold) {
  if (mean_loglik.size() != bench_mean.size()) throw DataError("leakage inputs differ in length");
  LeakageReport out;
  out.threshold = threshold;
  out.per_model = standardize(mean_loglik) - standardize(bench_mean);
  for (Eigen::Index i = 0; i < out.per_model.size(); ++i) {
    if (out.per_model(i) > threshold) out.flagged.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

Vector average_ranks(const Vector& v) {
  const auto n = static_cast<std::size_t>(v.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v(a) < v(b); });
  Vector ranks(v.size());
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start + 1;
    while (end < n && v(order[end]) == v(order[start])) ++end;
    const double rank = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t t = start; t < end; ++t) ranks(order[t]) = rank;
    start = end;
  }
  return ranks;
}

double pearson(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DataError("correlation inputs differ in length");
  if (a.size() < 2) throw DataError("correlation needs at least 2 samples");
  const auto ca = (a.array() - a.mean()).matrix();
  const auto cb = (b.array() - b.mean()).matrix();
  const double na = ca.norm();
  const double nb = cb.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DataError("correlation is undefined for a constant vector");
  return std::clamp(ca.dot(cb) / (na * nb), -1.0, 1.0);
}

CorrelationReport correlations(const Vector& pred, const Vector& actual) {
  CorrelationReport out;
  out.pearson_r = pearson(pred, actual);
  out.spearman_rho = pearson(average_ranks(pred), average_ranks(actual));
  out.n = static_cast<std::size_t>(pred.size());
  return out;
}

ErrorDecomposition decompose_error(const Matrix& eps) {
  if (eps.size() == 0) throw DataError("empty error matrix");
  if (!eps.allFinite()) throw DataError("error matrix contains non-finite values");
  const Vector rows = kernels::parallel::row_means(eps);
  const Vector cols = kernels::parallel::col_means(eps);
  ErrorDecomposition out;
  out.a = rows.sum() / static_cast<double>(rows.size());
  out.b = rows.array() - out.a;
  out.c = cols.array() - out.a;
  out.d.resize(eps.rows(), eps.cols());
  for (Eigen::Index i = 0; i < eps.rows(); ++i) {
    for (Eigen::Index s = 0; s < eps.cols(); ++s) out.d(i, s) = eps(i, s) - out.a - out.b(i) - out.c(s);
  }
  return out;
}

}  // namespace llmap
