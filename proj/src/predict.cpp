#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "llmap/error.hpp"
#include "llmap/kernels.hpp"
#include "llmap/matrix_core.hpp"
#include "llmap/predict.hpp"
#include "llmap/rng.hpp"

namespace llmap {

namespace {

using Index = Eigen::Index;

Vector solve_spd(Eigen::MatrixXd a, const Vector& b) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.solve(b);
  const double scale = std::max(a.trace() / static_cast<double>(a.rows()), 1.0);
  double jitter = 1e-12 * scale;
  for (int attempt = 0; attempt < 12; ++attempt, jitter *= 10.0) {
    a.diagonal().array() += jitter;
    llt.compute(a);
    if (llt.info() == Eigen::Success) return llt.solve(b);
  }
  throw DataError("ridge system is not positive definite");
}

// Ridge fits expressed through a precomputed Gram matrix G = X X^T over all
// rows. With an intercept the kernel is centered on the training rows:
// Kc(a, b) = G(a, b) - m(a) - m(b) + c, m(a) = mean_t G(a, t), c = mean_t m(t).
class KernelRidge {
 public:
  KernelRidge(const Matrix& gram, const Vector& y, std::vector<std::size_t> train, bool intercept)
      : gram_(gram), train_(std::move(train)), intercept_(intercept) {
    const auto n = static_cast<Index>(train_.size());
    y_train_.resize(n);
    for (Index t = 0; t < n; ++t) y_train_(t) = y(Index(train_[std::size_t(t)]));
    y_mean_ = intercept_ ? y_train_.mean() : 0.0;
    m_.resize(gram.rows());
    if (intercept_) {
      for (Index a = 0; a < gram.rows(); ++a) {
        double s = 0.0;
        for (auto t : train_) s += gram(a, Index(t));
        m_(a) = s / static_cast<double>(n);
      }
      c_ = 0.0;
      for (auto t : train_) c_ += m_(Index(t));
      c_ /= static_cast<double>(n);
    } else {
      m_.setZero();
    }
    k_train_.resize(n, n);
    for (Index r = 0; r < n; ++r) {
      for (Index s = 0; s < n; ++s) k_train_(r, s) = kernel(train_[std::size_t(r)], train_[std::size_t(s)]);
    }
  }

  // Dual coefficients for one penalty.
  Vector solve(double alpha) const {
    Eigen::MatrixXd a = k_train_;
    a.diagonal().array() += alpha;
    return solve_spd(std::move(a), (y_train_.array() - y_mean_).matrix());
  }

  double predict(const Vector& dual, std::size_t row) const {
    double s = 0.0;
    for (std::size_t t = 0; t < train_.size(); ++t) s += dual(Index(t)) * kernel(row, train_[t]);
    return y_mean_ + s;
  }

 private:
  double kernel(std::size_t a, std::size_t b) const {
    return gram_(Index(a), Index(b)) - m_(Index(a)) - m_(Index(b)) + c_;
  }

  const Matrix& gram_;
  std::vector<std::size_t> train_;
  bool intercept_;
  Vector y_train_;
  double y_mean_ = 0.0;
  Vector m_;
  double c_ = 0.0;
  Eigen::MatrixXd k_train_;
};

std::uint64_t inner_seed(std::uint64_t seed, std::size_t fold) {
  SplitMix64 mix(seed ^ (static_cast<std::uint64_t>(fold + 1) << 32));
  return mix.next();
}

double select_alpha(const Matrix& gram, const Vector& y, const std::vector<std::size_t>& train,
                    const std::vector<std::string>& groups, const PredictionTask& task, std::uint64_t seed,
                    bool& fell_back) {
  fell_back = false;
  if (task.alpha_grid.size() == 1) return task.alpha_grid.front();
  if (train.size() < task.inner_folds) throw DataError("too few training rows for inner cross-validation");
  std::vector<std::string> train_groups;
  for (auto t : train) train_groups.push_back(groups[t]);
  const std::set<std::string> distinct(train_groups.begin(), train_groups.end());
  FoldPlan plan;
  if (task.grouped && distinct.size() >= task.inner_folds) {
    plan = group_kfold(train_groups, task.inner_folds, seed);
  } else {
    fell_back = task.grouped;
    plan = random_kfold(train.size(), task.inner_folds, seed);
  }

  std::vector<double> mse_sum(task.alpha_grid.size(), 0.0);
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    std::vector<std::size_t> fit_rows, held_rows;
    for (std::size_t r = 0; r < train.size(); ++r) (plan.fold[r] == f ? held_rows : fit_rows).push_back(train[r]);
    const KernelRidge model(gram, y, fit_rows, task.fit_intercept);
    for (std::size_t g = 0; g < task.alpha_grid.size(); ++g) {
      const Vector dual = model.solve(task.alpha_grid[g]);
      double se = 0.0;
      for (auto h : held_rows) {
        const double e = model.predict(dual, h) - y(Index(h));
        se += e * e;
      }
      mse_sum[g] += se / static_cast<double>(held_rows.size());
    }
  }
  const auto best = std::min_element(mse_sum.begin(), mse_sum.end()) - mse_sum.begin();
  return task.alpha_grid[std::size_t(best)];
}

}  // namespace

RidgeModel fit_ridge(const Matrix& x, const Vector& y, double alpha, bool fit_intercept) {
  if (!(alpha > 0.0)) throw ConfigError("ridge alpha must be positive");
  if (x.rows() < 1 || x.rows() != y.size()) throw DataError("ridge needs n >= 1 rows matching the target");
  if (!x.allFinite() || !y.allFinite()) throw DataError("ridge inputs contain non-finite values");
  Vector x_mean = Vector::Zero(x.cols());
  double y_mean = 0.0;
  if (fit_intercept) {
    x_mean = kernels::parallel::col_means(x);
    y_mean = y.mean();
  }
  const Matrix xc = x.rowwise() - x_mean.transpose();
  Eigen::MatrixXd k = kernels::parallel::gram(xc);
  k.diagonal().array() += alpha;
  const Vector a = solve_spd(std::move(k), (y.array() - y_mean).matrix());
  RidgeModel m;
  m.weights = xc.transpose() * a;
  m.intercept = fit_intercept ? y_mean - x_mean.dot(m.weights) : 0.0;
  m.alpha = alpha;
  return m;
}

Vector predict(const RidgeModel& model, const Matrix& x) {
  if (x.cols() != model.weights.size()) throw DataError("feature count does not match the ridge model");
  return (x * model.weights).array() + model.intercept;
}

std::vector<double> benchmark_alpha_grid() {
  std::vector<double> g;
  for (int e = 1; e <= 9; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

std::vector<double> loglik_alpha_grid() {
  std::vector<double> g;
  for (int e = -4; e <= 4; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

FoldPlan group_kfold(const std::vector<std::string>& groups, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw ConfigError("need at least 2 folds");
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t r = 0; r < groups.size(); ++r) members[groups[r]].push_back(r);
  if (members.size() < n_folds) {
    throw ConfigError("cannot split " + std::to_string(members.size()) + " groups into " +
                      std::to_string(n_folds) + " folds");
  }
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [label, rows] : members) order.push_back(&rows);
  SplitMix64 rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::stable_sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->size() > b->size(); });

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.fold.assign(groups.size(), 0);
  std::vector<std::size_t> load(n_folds, 0);
  for (const auto* rows : order) {
    const auto f = static_cast<std::size_t>(std::min_element(load.begin(), load.end()) - load.begin());
    for (auto r : *rows) plan.fold[r] = f;
    load[f] += rows->size();
  }
  return plan;
}

FoldPlan random_kfold(std::size_t n, std::size_t n_folds, std::uint64_t seed) {
  std::vector<std::string> own(n);
  for (std::size_t r = 0; r < n; ++r) own[r] = std::to_string(r);
  FoldPlan plan = group_kfold(own, n_folds, seed);
  plan.grouped = false;
  return plan;
}

std::vector<std::string> audit_fold_plan(const FoldPlan& plan, const std::vector<std::string>& groups) {
  std::vector<std::string> issues;
  if (plan.fold.size() != groups.size()) {
    issues.push_back("plan covers " + std::to_string(plan.fold.size()) + " rows, expected " +
                     std::to_string(groups.size()));
    return issues;
  }
  std::vector<std::size_t> load(plan.n_folds, 0);
  std::map<std::string, std::size_t> group_fold;
  std::map<std::string, std::size_t> group_size;
  for (std::size_t r = 0; r < groups.size(); ++r) {
    const auto f = plan.fold[r];
    if (f >= plan.n_folds) {
      issues.push_back("row " + std::to_string(r) + " has fold " + std::to_string(f) + " out of range");
      continue;
    }
    ++load[f];
    ++group_size[groups[r]];
    if (!plan.grouped) continue;
    const auto [it, fresh] = group_fold.emplace(groups[r], f);
    if (!fresh && it->second != f) {
      issues.push_back("group '" + groups[r] + "' appears in folds " + std::to_string(it->second) + " and " +
                       std::to_string(f));
    }
  }
  for (std::size_t f = 0; f < plan.n_folds; ++f) {
    if (load[f] == 0) issues.push_back("fold " + std::to_string(f) + " is empty");
  }
  if (!load.empty()) {
    std::size_t largest = 1;
    if (plan.grouped) {
      for (const auto& [g, n] : group_size) largest = std::max(largest, n);
    }
    const auto [lo, hi] = std::minmax_element(load.begin(), load.end());
    if (*hi - *lo > largest) issues.push_back("fold sizes spread " + std::to_string(*hi - *lo) + " exceeds " + std::to_string(largest));
  }
  return issues;
}

void PredictionTask::validate() const {
  const auto k = static_cast<std::size_t>(features.rows());
  if (k < 2) throw DataError("prediction needs at least 2 models");
  if (static_cast<std::size_t>(target.size()) != k) throw DataError("target length does not match features");
  if (groups.size() != k) throw DataError("group labels do not cover every model");
  if (alpha_grid.empty()) throw ConfigError("alpha grid is empty");
  for (double a : alpha_grid) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("alpha grid values must be positive");
  }
  if (n_folds < 2 || inner_folds < 2) throw ConfigError("need at least 2 folds");
  if (seeds.empty()) throw ConfigError("need at least one seed");
  if (clip_range && !(clip_range->first <= clip_range->second)) throw ConfigError("clip range is inverted");
  if (!features.allFinite() || !target.allFinite()) throw DataError("prediction inputs contain non-finite values");
}

CrossValResult cross_val_predict(const PredictionTask& task) {
  task.validate();
  const auto k = static_cast<std::size_t>(task.features.rows());
  const Matrix centered = task.fit_intercept
                              ? Matrix(task.features.rowwise() - kernels::parallel::col_means(task.features).transpose())
                              : task.features;
  const Matrix gram = kernels::parallel::gram(centered);

  CrossValResult out;
  for (auto seed : task.seeds) {
    out.plans.push_back(task.grouped ? group_kfold(task.groups, task.n_folds, seed)
                                     : random_kfold(k, task.n_folds, seed));
  }
  const std::size_t n_seeds = task.seeds.size();
  const std::size_t n_tasks = n_seeds * task.n_folds;
  std::vector<std::vector<std::pair<std::size_t, double>>> fold_pred(n_tasks);
  std::vector<double> alpha(n_tasks, 0.0);
  std::vector<char> fell_back(n_tasks, 0);
  std::vector<std::string> failure(n_tasks);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t job = 0; job < n_tasks; ++job) {
    const std::size_t si = job / task.n_folds;
    const std::size_t f = job % task.n_folds;
    try {
      std::vector<std::size_t> train, held;
      for (std::size_t r = 0; r < k; ++r) (out.plans[si].fold[r] == f ? held : train).push_back(r);
      bool fb = false;
      alpha[job] = select_alpha(gram, task.target, train, task.groups, task,
                                inner_seed(task.seeds[si], f), fb);
      fell_back[job] = fb;
      const KernelRidge model(gram, task.target, train, task.fit_intercept);
      const Vector dual = model.solve(alpha[job]);
      for (auto h : held) {
        double p = model.predict(dual, h);
        if (task.clip_range) p = std::clamp(p, task.clip_range->first, task.clip_range->second);
        fold_pred[job].emplace_back(h, p);
      }
    } catch (const std::exception& e) {
      failure[job] = e.what();
    }
  }
  for (const auto& msg : failure) {
    if (!msg.empty()) throw DataError(msg);
  }

  out.per_seed = Matrix::Zero(Index(n_seeds), Index(k));
  out.selected_alpha.assign(n_seeds, std::vector<double>(task.n_folds, 0.0));
  for (std::size_t job = 0; job < n_tasks; ++job) {
    const std::size_t si = job / task.n_folds;
    for (const auto& [row, p] : fold_pred[job]) out.per_seed(Index(si), Index(row)) = p;
    out.selected_alpha[si][job % task.n_folds] = alpha[job];
    out.inner_fallbacks += fell_back[job] ? 1 : 0;
  }
  out.predicted = Vector::Zero(Index(k));
  for (std::size_t si = 0; si < n_seeds; ++si) out.predicted += out.per_seed.row(Index(si)).transpose();
  out.predicted /= static_cast<double>(n_seeds);
  out.overall = correlations(out.predicted, task.target);
  for (std::size_t si = 0; si < n_seeds; ++si) {
    out.per_seed_report.push_back(correlations(out.per_seed.row(Index(si)).transpose(), task.target));
  }
  return out;
}

TargetSelection select_target(const LogLikMatrix& matrix, const std::string& name) {
  TargetSelection out;
  std::vector<double> values;
  if (name == "mean_loglik") {
    out.is_benchmark = false;
    const Vector means = kernels::parallel::row_means(matrix.values);
    for (std::size_t i = 0; i < matrix.models.size(); ++i) {
      out.rows.push_back(i);
      values.push_back(means(Index(i)));
    }
  } else {
    const auto& tasks = benchmark_tasks();
    const bool mean6 = name == "6-TaskMean";
    if (!mean6 && std::find(tasks.begin(), tasks.end(), name) == tasks.end()) {
      throw ConfigError("unknown target '" + name + "'");
    }
    for (std::size_t i = 0; i < matrix.models.size(); ++i) {
      const auto& scores = matrix.models[i].benchmark_scores;
      if (mean6) {
        double s = 0.0;
        bool complete = true;
        for (const auto& t : tasks) {
          const auto it = scores.find(t);
          if (it == scores.end()) {
            complete = false;
            break;
          }
          s += it->second;
        }
        if (!complete) continue;
        out.rows.push_back(i);
        values.push_back(s / static_cast<double>(tasks.size()));
      } else {
        const auto it = scores.find(name);
        if (it == scores.end()) continue;
        out.rows.push_back(i);
        values.push_back(it->second);
      }
    }
  }
  out.values = Eigen::Map<const Vector>(values.data(), Index(values.size()));
  return out;
}

std::string format_predictions(const std::vector<std::string>& model_ids, const std::string& target_name,
                               const CrossValResult& result, const Vector& actual) {
  std::string out = "model_id\ttarget_name\tpredicted\tactual\tfold\tseed_count\n";
  const std::string seeds = std::to_string(result.plans.size());
  for (std::size_t i = 0; i < model_ids.size(); ++i) {
    out += model_ids[i] + '\t' + target_name + '\t' + format_double(result.predicted(Index(i))) + '\t' +
           format_double(actual(Index(i))) + '\t' + std::to_string(result.plans.front().fold[i]) + '\t' + seeds + '\n';
  }
  return out;
}

}  // namespace llmap
