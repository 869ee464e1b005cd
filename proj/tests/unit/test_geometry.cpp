#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "llmap/error.hpp"
#include "llmap/geometry.hpp"
#include "llmap/matrix_core.hpp"

using namespace llmap;

namespace {

ModelCoordinates coords_of(const Matrix& l) {
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < l.rows(); ++i) ids.push_back("m" + std::to_string(i));
  return double_center(l, ids);
}

// Direct biased variance of l_i - l_j.
double diff_variance(const Matrix& l, Eigen::Index i, Eigen::Index j) {
  const Vector d = (l.row(i) - l.row(j)).transpose();
  const double mean = d.mean();
  double v = 0.0;
  for (Eigen::Index s = 0; s < d.size(); ++s) v += (d(s) - mean) * (d(s) - mean);
  return v / double(d.size());
}

}  // namespace

TEST_CASE("kl_matrix hand examples") {
  ModelCoordinates c;
  c.model_ids = {"a", "b"};
  c.q = (Matrix(2, 2) << 1, -1, -1, 1).finished();
  const auto div = kl_matrix(c);
  CHECK(div.values(0, 1) == 2.0);
  CHECK(div.values(1, 0) == 2.0);
  CHECK(div.values(0, 0) == 0.0);
  CHECK(unit_name(div.unit) == "nats_per_text");

  const auto worked = kl_matrix(coords_of((Matrix(2, 2) << 1, 3, 2, 2).finished()));
  CHECK(worked.values(0, 1) == 0.5);

  Matrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  CHECK(kl_matrix(coords_of(same)).values(0, 1) == 0.0);
  CHECK_THROWS_AS(kl_matrix(coords_of(Matrix::Ones(2, 1))), DataError);
}

TEST_CASE("kl_matrix equals half the variance of log-likelihood differences") {
  SplitMix64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const auto k = Eigen::Index(2 + rng.below(8));
    const auto n = Eigen::Index(2 + rng.below(100));
    const Matrix l = testutil::random_matrix(rng, k, n, 20.0, -200.0);
    const auto div = kl_matrix(coords_of(l));
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        CHECK(div.values(i, j) == doctest::Approx(diff_variance(l, i, j) / 2.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("kl_matrix properties") {
  SplitMix64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index k = 6, n = 40;
    const Matrix l = testutil::random_matrix(rng, k, n, 3.0);
    const auto div = kl_matrix(coords_of(l));
    CHECK(div.values == div.values.transpose());
    CHECK((div.values.array() >= 0.0).all());
    for (Eigen::Index a = 0; a < k; ++a) {
      for (Eigen::Index b = 0; b < k; ++b) {
        for (Eigen::Index c = 0; c < k; ++c) {
          CHECK(std::sqrt(div.values(a, c)) <= std::sqrt(div.values(a, b)) + std::sqrt(div.values(b, c)) + 1e-12);
        }
      }
    }
    Matrix shifted = l;
    for (Eigen::Index i = 0; i < k; ++i) shifted.row(i).array() += rng.normal() * 50.0;
    for (Eigen::Index s = 0; s < n; ++s) shifted.col(s).array() += rng.normal() * 50.0;
    CHECK(testutil::max_abs(kl_matrix(coords_of(shifted)).values - div.values) <= 1e-9);
  }
}

TEST_CASE("bits per byte conversion") {
  CHECK(std::abs(bits_per_byte_factor(972.3188) - 0.001484) <= 1e-6);
  DivergenceMatrix d;
  d.model_ids = {"a", "b"};
  d.values = (Matrix(2, 2) << 0, 1000, 1000, 0).finished();
  const auto bpb = to_bits_per_byte(d, 972.3188);
  CHECK(std::abs(bpb.values(0, 1) - 1.484) <= 0.001);
  CHECK(1000.0 / 972.3188 == doctest::Approx(1.028).epsilon(1e-3));
  CHECK(bpb.values(0, 0) == 0.0);
  CHECK(bpb.unit == DivergenceUnit::bits_per_byte);
  CHECK_THROWS_AS(to_bits_per_byte(bpb, 972.3188), ConfigError);
  CHECK_THROWS_AS(to_bits_per_byte(d, 0.0), ConfigError);
}

TEST_CASE("nearest neighbors ordering") {
  DivergenceMatrix d;
  d.model_ids = {"a", "b", "c", "d"};
  d.values = Matrix::Zero(4, 4);
  d.values.row(0) << 0, 3, 1, 2;
  d.values.col(0) = d.values.row(0).transpose();
  const auto t = nearest_neighbors(d, "a", 3);
  REQUIRE(t.neighbors.size() == 3);
  CHECK(t.neighbors[0].model_id == "c");
  CHECK(t.neighbors[1].model_id == "d");
  CHECK(t.neighbors[2].model_id == "b");

  DivergenceMatrix tie;
  tie.model_ids = {"q", "zeta", "alpha"};
  tie.values = Matrix::Ones(3, 3);
  tie.values.diagonal().setZero();
  const auto tt = nearest_neighbors(tie, "q", 2);
  CHECK(tt.neighbors[0].model_id == "alpha");
  CHECK(tt.neighbors[1].model_id == "zeta");

  DivergenceMatrix two;
  two.model_ids = {"x", "y"};
  two.values = (Matrix(2, 2) << 0, 5, 5, 0).finished();
  CHECK(nearest_neighbors(two, "x", 1).neighbors[0].model_id == "y");
  CHECK_THROWS_AS(nearest_neighbors(two, "x", 2), ConfigError);
  CHECK_THROWS_AS(nearest_neighbors(two, "nope", 1), ConfigError);

  const auto tsv = format_neighbors({t}, DivergenceUnit::nats_per_text);
  CHECK(tsv.rfind("query_id\trank\tneighbor_id\tdivergence\tunit\na\t1\tc\t1\tnats_per_text\n", 0) == 0);
}

TEST_CASE("neighbor rankings survive unit conversion") {
  SplitMix64 rng(4);
  const auto div = kl_matrix(coords_of(testutil::random_matrix(rng, 8, 30)));
  const auto bpb = to_bits_per_byte(div, 812.5);
  for (const auto& id : div.model_ids) {
    const auto a = nearest_neighbors(div, id, 7);
    const auto b = nearest_neighbors(bpb, id, 7);
    for (std::size_t r = 0; r < 7; ++r) CHECK(a.neighbors[r].model_id == b.neighbors[r].model_id);
  }
}

TEST_CASE("height decomposition") {
  const auto h = decompose(coords_of((Matrix(2, 2) << 1, 3, 2, 2).finished()));
  CHECK(h.total_sq(0, 1) == doctest::Approx(2.0));
  CHECK(h.horizontal_sq(0, 1) == doctest::Approx(2.0));
  CHECK(h.height(0) == h.height(1));

  const auto zero = decompose(coords_of(Matrix::Constant(2, 3, -4.0)));
  CHECK(zero.total_sq(0, 1) == 0.0);
  CHECK(zero.horizontal_sq(0, 1) == 0.0);

  SplitMix64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix l = testutil::random_matrix(rng, 5, 20, 10.0, -100.0);
    const auto d = decompose(coords_of(l));
    for (Eigen::Index i = 0; i < 5; ++i) {
      for (Eigen::Index j = 0; j < 5; ++j) {
        const double dh = d.height(i) - d.height(j);
        CHECK(testutil::rel_diff(d.total_sq(i, j), d.horizontal_sq(i, j) + dh * dh) <= 1e-9);
        CHECK(testutil::rel_diff(d.total_sq(i, j), (l.row(i) - l.row(j)).squaredNorm()) <= 1e-9);
      }
    }
  }
}
