#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "llmap/analysis.hpp"
#include "llmap/error.hpp"
#include "llmap/identities.hpp"
#include "llmap/matrix_core.hpp"

using namespace llmap;

namespace {

LogLikMatrix with_categories(const Matrix& values, const std::vector<std::string>& cats) {
  LogLikMatrix m;
  for (Eigen::Index i = 0; i < values.rows(); ++i) m.models.push_back({"m" + std::to_string(i), "t", {}, {}, {}, {}});
  for (std::size_t s = 0; s < cats.size(); ++s) m.texts.push_back({"x" + std::to_string(s), cats[s], 10});
  m.values = values;
  return m;
}

}  // namespace

TEST_CASE("standardize_columns") {
  const Matrix z = standardize_columns((Matrix(2, 1) << 0, 10).finished());
  CHECK(z(0, 0) == -1.0);
  CHECK(z(1, 0) == 1.0);
  SplitMix64 rng(71);
  const Matrix raw = testutil::random_matrix(rng, 9, 4, 3.0, 7.0);
  const Matrix a = standardize_columns(raw);
  CHECK(testutil::max_abs(standardize_columns(a) - a) <= 1e-12);
  CHECK(testutil::max_abs(standardize_columns(Matrix(raw.array() * 4.0 + 11.0)) - a) <= 1e-12);
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    CHECK(std::abs(a.col(c).mean()) <= 1e-9);
    CHECK(std::sqrt(a.col(c).squaredNorm() / 9.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS_AS(standardize_columns(Matrix::Ones(3, 2)), DataError);
}

TEST_CASE("primary_category") {
  const auto two = primary_category(with_categories((Matrix(2, 2) << -1, -3, -3, -1).finished(), {"A", "B"}));
  CHECK(two.labels == std::vector<std::string>{"A", "B"});
  const auto one = primary_category(with_categories((Matrix(3, 2) << 1, 2, 3, 4, 5, 6).finished(), {"only", "only"}));
  CHECK(one.labels == std::vector<std::string>{"only", "only", "only"});

  SplitMix64 rng(73);
  const std::vector<std::string> cats{"web", "code", "web", "wiki", "code", "wiki", "web"};
  const Matrix l = testutil::random_matrix(rng, 6, 7, 10.0, -100.0);
  const auto base = primary_category(with_categories(l, cats));
  Matrix shifted = l;
  for (std::size_t s = 0; s < cats.size(); ++s) {
    if (cats[s] == "code") shifted.col(Eigen::Index(s)).array() += 37.0;
  }
  CHECK(primary_category(with_categories(shifted, cats)).labels == base.labels);
  CHECK_THROWS_AS(primary_category(with_categories(l, {"a", "", "b", "a", "a", "b", "a"})), DataError);
}

TEST_CASE("primary_task") {
  const std::vector<std::string> tasks{"T1", "T2", "T3"};
  Matrix s(3, 3);
  s << 90, 80, 70,  // top on every task: first task wins the tie
      10, 10, 10,   // below the mean everywhere
      50, 90, 60;
  const auto r = primary_task(s, tasks);
  CHECK(r.labels[0] == "T1");
  CHECK(r.labels[1] == kAllUnder0);
  CHECK(r.labels[2] == "T2");
  CHECK_THROWS_AS(primary_task(Matrix::Ones(3, 3), tasks), DataError);
}

TEST_CASE("leakage_scores") {
  const Vector a = (Vector(4) << 1, 2, 3, 4).finished();
  const auto same = leakage_scores(a, Vector(a.array() * 2.0 + 5.0));
  CHECK(same.per_model.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(same.flagged.empty());

  const Vector loglik = (Vector(4) << -100, -101, -99, -20).finished();
  const Vector bench = (Vector(4) << 50, 40, 60, 45).finished();
  const auto r = leakage_scores(loglik, bench);
  Eigen::Index arg = 0;
  r.per_model.maxCoeff(&arg);
  CHECK(arg == 3);
  CHECK(std::abs(r.per_model.sum()) <= 1e-9);
  CHECK(r.flagged == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(leakage_scores(Vector::Ones(4), bench), DataError);
}

TEST_CASE("correlations") {
  SplitMix64 rng(79);
  const Matrix x = testutil::random_matrix(rng, 30, 1);
  const Vector a = x.col(0);
  const auto affine = correlations(Vector(2.0 * a.array() + 3.0), a);
  CHECK(affine.pearson_r == doctest::Approx(1.0));
  CHECK(affine.spearman_rho == doctest::Approx(1.0));
  const auto mono = correlations(Vector(a.array().exp()), a);
  CHECK(mono.spearman_rho == doctest::Approx(1.0));
  CHECK(mono.pearson_r < 1.0 - 1e-6);

  const Vector u = (Vector(4) << 1, 2, 2, 3).finished();
  const Vector v = (Vector(4) << 10, 20, 20, 40).finished();
  CHECK(average_ranks(u) == Vector((Vector(4) << 1, 2.5, 2.5, 4).finished()));
  CHECK(correlations(u, v).spearman_rho == doctest::Approx(1.0));
  CHECK_THROWS_AS(correlations(Vector::Ones(3), v.head(3)), DataError);
}

TEST_CASE("decompose_error") {
  const auto e = decompose_error((Matrix(2, 2) << 1, 2, 3, 4).finished());
  CHECK(e.a == 2.5);
  CHECK(e.b == Vector((Vector(2) << -1, 1).finished()));
  CHECK(e.c == Vector((Vector(2) << -0.5, 0.5).finished()));
  CHECK(testutil::max_abs(e.d) == 0.0);

  SplitMix64 rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const auto k = Eigen::Index(2 + rng.below(8));
    const auto n = Eigen::Index(2 + rng.below(40));
    const Matrix eps = testutil::random_matrix(rng, k, n, 2.0, 1.0);
    const auto d = decompose_error(eps);
    CHECK(std::abs(d.b.sum()) <= 1e-9);
    CHECK(std::abs(d.c.sum()) <= 1e-9);
    CHECK(d.d.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(d.d.colwise().sum().cwiseAbs().maxCoeff() <= 1e-9);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index s = 0; s < n; ++s) CHECK(d.a + d.b(i) + d.c(s) + d.d(i, s) == doctest::Approx(eps(i, s)));
    }
    const Matrix truth = testutil::random_matrix(rng, k, n, 30.0, -200.0);
    const Matrix diff = double_center(Matrix(truth + eps)).q - double_center(truth).q;
    CHECK(testutil::max_abs(diff - d.d) <= 1e-9 * 200.0);
  }
}

TEST_CASE("identity suite passes and detects a broken tolerance") {
  IdentityConfig cfg;
  cfg.trials = 20;
  cfg.seed = 4;
  const auto checks = check_identities(cfg);
  CHECK(checks.size() == 7);
  for (const auto& ch : checks) {
    INFO(ch.name << " " << ch.max_error);
    CHECK(ch.passed());
    CHECK(ch.trials == 20);
  }
  cfg.tolerance = 0.0;
  cfg.trials = 5;
  bool any_failed = false;
  for (const auto& ch : check_identities(cfg)) any_failed = any_failed || !ch.passed();
  CHECK(any_failed);
  cfg.max_models = 1;
  CHECK_THROWS_AS(check_identities(cfg), ConfigError);
}
