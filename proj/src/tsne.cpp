#include <algorithm>
#include <cmath>
#include <limits>

#include "llmap/error.hpp"
#include "llmap/kernels.hpp"
#include "llmap/mapping.hpp"
#include "llmap/rng.hpp"

namespace llmap {

namespace {

constexpr int kBisectionSteps = 50;
constexpr double kEntropyTol = 1e-5;
constexpr double kFloor = 1e-12;
constexpr double kMinGain = 0.01;
constexpr double kInitSigma = 1e-4;

// Fills row i of `p` with exp(-beta * (d_ij - d_min)) normalized over j != i
// and returns the Shannon entropy (nats) of that row.
double conditional_row(const Matrix& d, Eigen::Index i, double beta, double d_min, Matrix& p) {
  const auto k = d.cols();
  double z = 0.0;
  double weighted = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    if (j == i) {
      p(i, j) = 0.0;
      continue;
    }
    const double shifted = d(i, j) - d_min;
    const double w = std::exp(-beta * shifted);
    p(i, j) = w;
    z += w;
    weighted += w * shifted;
  }
  for (Eigen::Index j = 0; j < k; ++j) p(i, j) /= z;
  return std::log(z) + beta * weighted / z;
}

}  // namespace

Affinities tsne_affinities(const Matrix& x, double perplexity) {
  const auto k = x.rows();
  if (!(perplexity > 1.0)) throw ConfigError("perplexity must exceed 1");
  if (static_cast<double>(k) < 3.0 * perplexity + 1.0) {
    throw ConfigError("t-SNE needs K >= 3 * perplexity + 1 (K = " + std::to_string(k) + ")");
  }
  if (!x.allFinite()) throw DataError("t-SNE input contains non-finite values");

  const Matrix d = kernels::parallel::pairwise_sq_dist(x);
  const double target = std::log(perplexity);
  Affinities out;
  out.conditional = Matrix::Zero(k, k);
  out.perplexity.resize(k);
  out.beta.resize(k);

#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < k; ++i) {
    double d_min = std::numeric_limits<double>::infinity();
    double d_sum = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == i) continue;
      d_min = std::min(d_min, d(i, j));
      d_sum += d(i, j);
    }
    const double d_mean = d_sum / static_cast<double>(k - 1) - d_min;
    double beta = d_mean > 0.0 ? 1.0 / d_mean : 1.0;
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    double h = conditional_row(d, i, beta, d_min, out.conditional);
    for (int step = 0; step < kBisectionSteps && std::abs(h - target) > kEntropyTol; ++step) {
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
      h = conditional_row(d, i, beta, d_min, out.conditional);
    }
    out.perplexity(i) = std::exp(h);
    out.beta(i) = beta;
  }
  return out;
}

EmbeddingResult tsne(const Matrix& x, const TsneParams& params, std::vector<std::string> model_ids) {
  if (params.iterations < 1) throw ConfigError("t-SNE needs at least one iteration");
  if (!(params.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  const Affinities aff = tsne_affinities(x, params.perplexity);
  const auto k = x.rows();

  Matrix p = (aff.conditional + aff.conditional.transpose()) / (2.0 * static_cast<double>(k));
  p = p.cwiseMax(kFloor);
  for (Eigen::Index i = 0; i < k; ++i) p(i, i) = 0.0;

  SplitMix64 rng(params.seed);
  Matrix y(k, 2);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index c = 0; c < 2; ++c) y(i, c) = kInitSigma * rng.normal();
  }
  Matrix update = Matrix::Zero(k, 2);
  Matrix gains = Matrix::Ones(k, 2);
  Matrix grad(k, 2);
  Matrix num(k, k);
  Vector row_z(k);
  const std::size_t early = params.iterations / 4;

  for (std::size_t it = 0; it < params.iterations; ++it) {
    const double exaggeration = it < early ? params.exaggeration : 1.0;
    const double momentum = it < early ? 0.5 : 0.8;

#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < k; ++i) {
      double z = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (j == i) {
          num(i, j) = 0.0;
          continue;
        }
        const double dx = y(i, 0) - y(j, 0);
        const double dy = y(i, 1) - y(j, 1);
        num(i, j) = 1.0 / (1.0 + dx * dx + dy * dy);
        z += num(i, j);
      }
      row_z(i) = z;
    }
    double z = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) z += row_z(i);

    // The constant factor 4 of the KL gradient is left folded into the learning rate.
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < k; ++i) {
      double gx = 0.0;
      double gy = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        if (j == i) continue;
        const double q = std::max(num(i, j) / z, kFloor);
        const double m = (exaggeration * p(i, j) - q) * num(i, j);
        gx += m * (y(i, 0) - y(j, 0));
        gy += m * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = gx;
      grad(i, 1) = gy;
    }

    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index c = 0; c < 2; ++c) {
        const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
        gains(i, c) = same_sign ? std::max(gains(i, c) * 0.8, kMinGain) : gains(i, c) + 0.2;
        update(i, c) = momentum * update(i, c) - params.learning_rate * gains(i, c) * grad(i, c);
        y(i, c) += update(i, c);
      }
    }
    const Vector centre = kernels::serial::col_means(y);
    y.rowwise() -= centre.transpose();
  }
  if (!y.allFinite()) throw DataError("t-SNE diverged");

  EmbeddingResult out;
  out.model_ids = std::move(model_ids);
  out.coords = std::move(y);
  out.method = "tsne";
  out.seed = params.seed;
  out.params = {{"perplexity", params.perplexity},
                {"iterations", static_cast<double>(params.iterations)},
                {"learning_rate", params.learning_rate}};
  return out;
}

}  // namespace llmap
