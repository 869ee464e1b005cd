#include "llmap/identities.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "llmap/analysis.hpp"
#include "llmap/error.hpp"
#include "llmap/geometry.hpp"
#include "llmap/matrix_core.hpp"
#include "llmap/rng.hpp"

namespace llmap {

namespace {

Matrix gaussian(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols, double scale, double shift) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = shift + scale * rng.normal();
  }
  return m;
}

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

// max |a - b| over entries, divided by the larger magnitude (at least 1).
double scaled_gap(const Matrix& a, const Matrix& b) {
  const double scale = std::max({1.0, max_abs(a), max_abs(b)});
  return max_abs(a - b) / scale;
}

}  // namespace

std::vector<IdentityCheck> check_identities(const IdentityConfig& cfg) {
  if (cfg.trials == 0 || cfg.min_models < 2 || cfg.max_models < cfg.min_models || cfg.min_texts < 2 ||
      cfg.max_texts < cfg.min_texts) {
    throw ConfigError("identity check needs trials >= 1 and sizes K, N >= 2");
  }
  std::vector<IdentityCheck> checks{{"height_decomposition"}, {"centering_zero_means"},
                                    {"centering_idempotent"},  {"centering_linear"},
                                    {"error_absorption"},      {"loglik_reconstruction"},
                                    {"variance_form"}};
  SplitMix64 rng(cfg.seed);
  auto record = [&](std::size_t k, double err) { checks[k].max_error = std::max(checks[k].max_error, err); };

  for (std::size_t t = 0; t < cfg.trials; ++t) {
    const auto k = static_cast<Eigen::Index>(cfg.min_models + rng.below(cfg.max_models - cfg.min_models + 1));
    const auto n = static_cast<Eigen::Index>(cfg.min_texts + rng.below(cfg.max_texts - cfg.min_texts + 1));
    const double scale = 1.0 + 20.0 * rng.uniform01();
    const Matrix l = gaussian(rng, k, n, scale, -100.0 * rng.uniform01());
    const auto c = double_center(l);

    const auto d = decompose(c);
    Matrix rebuilt(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double dh = d.height(i) - d.height(j);
        rebuilt(i, j) = d.horizontal_sq(i, j) + dh * dh;
      }
    }
    record(0, scaled_gap(rebuilt, d.total_sq));

    const double q_scale = std::max(1.0, max_abs(c.q));
    record(1, std::max(c.q.rowwise().mean().cwiseAbs().maxCoeff(), c.q.colwise().mean().cwiseAbs().maxCoeff()) /
                  q_scale);

    record(2, scaled_gap(double_center(c.q).q, c.q));

    const Matrix l2 = gaussian(rng, k, n, scale, 0.0);
    const double a = rng.normal(), b = rng.normal();
    record(3, scaled_gap(double_center(Matrix(a * l + b * l2)).q, a * c.q + b * double_center(l2).q));

    const Matrix eps = gaussian(rng, k, n, 0.1 * scale, rng.normal());
    const auto e = decompose_error(eps);
    Matrix sum(k, n);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index s = 0; s < n; ++s) sum(i, s) = e.a + e.b(i) + e.c(s) + e.d(i, s);
    }
    record(4, std::max(scaled_gap(Matrix(double_center(Matrix(l + eps)).q - c.q), e.d), scaled_gap(sum, eps)));

    Matrix recon(k, n);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index s = 0; s < n; ++s) recon(i, s) = c.mean_loglik(i) + c.column_mean_xi(s) + c.q(i, s);
    }
    record(5, scaled_gap(recon, l));

    double worst = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const Eigen::RowVectorXd diff = l.row(i) - l.row(j);
        const double var = (diff.array() - diff.mean()).square().mean();
        const double dist = (c.q.row(i) - c.q.row(j)).squaredNorm() / static_cast<double>(n);
        worst = std::max(worst, std::abs(dist - var) / std::max({1.0, std::abs(var), std::abs(dist)}));
      }
    }
    record(6, worst);
  }
  for (auto& ch : checks) {
    ch.trials = cfg.trials;
    ch.tolerance = cfg.tolerance;
  }
  return checks;
}

std::string format_identity_checks(const std::vector<IdentityCheck>& checks) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& ch : checks) {
    out.push_back({{"name", ch.name},
                   {"max_error", ch.max_error},
                   {"tolerance", ch.tolerance},
                   {"trials", ch.trials},
                   {"passed", ch.passed()}});
  }
  return out.dump(2) + "\n";
}

}  // namespace llmap
