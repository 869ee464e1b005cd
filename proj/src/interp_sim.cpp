#include <algorithm>
#include <cmath>
#include <cstdio>

#include "llmap/error.hpp"
#include "llmap/kernels.hpp"
#include "llmap/oracle.hpp"
#include "llmap/predict.hpp"

namespace llmap {

Vector interpolate_loglik(const InterpolationGrid& grid, double alpha, double beta) {
  if (grid.l0.size() != grid.l1.size() || grid.l0.size() != grid.l2.size()) {
    throw DataError("interpolation vectors differ in length");
  }
  if (!std::isfinite(alpha) || !std::isfinite(beta)) throw ConfigError("alpha and beta must be finite");
  return grid.l0 + alpha * (grid.l1 - grid.l0) + beta * (grid.l2 - grid.l0);
}

std::pair<double, double> weight_plane_coords(double r1, double r2, double phi, double alpha, double beta) {
  return {alpha * r1 + beta * r2 * std::cos(phi), beta * r2 * std::sin(phi)};
}

LogLikMatrix simulate_matrix(const ExpFamily& fam, std::size_t n_texts, std::uint64_t seed) {
  if (n_texts < 2) throw ConfigError("simulation needs at least 2 texts");
  const auto samples = sample_outcomes(fam.base(), n_texts, seed);
  LogLikMatrix out;
  out.values = family_loglik(fam, samples);

  SplitMix64 rng(seed ^ 0x7e475ULL);
  for (std::size_t s = 0; s < n_texts; ++s) {
    TextRecord t;
    t.text_id = "t" + std::to_string(s);
    t.category = "cat" + std::to_string(samples[s] % 3);
    t.byte_length = 256 + static_cast<std::int64_t>(rng.below(769));
    out.texts.push_back(std::move(t));
  }

  const std::size_t k = fam.n_models();
  const Vector means = kernels::parallel::row_means(out.values);
  const double mu = means.mean();
  const double sd = std::sqrt((means.array() - mu).square().mean());
  const std::size_t n_types = std::max<std::size_t>(1, (3 * k + 3) / 4);
  for (std::size_t i = 0; i < k; ++i) {
    ModelRecord m;
    m.model_id = "m" + std::to_string(i);
    m.model_type = "type" + std::to_string(i % n_types);
    m.param_count = static_cast<std::int64_t>(1000000 * (i + 1));
    char date[16];
    std::snprintf(date, sizeof(date), "2023-01-%02zu", i % 28 + 1);
    m.created = date;
    const double z = sd > 0.0 ? (means(Eigen::Index(i)) - mu) / sd : 0.0;
    const auto& tasks = benchmark_tasks();
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const double v = 50.0 + 12.0 * z + 8.0 * std::sin(static_cast<double>(i + 3 * t));
      m.benchmark_scores[tasks[t]] = std::clamp(v, 0.0, 100.0);
    }
    out.models.push_back(std::move(m));
  }
  out.validate();
  return out;
}

}  // namespace llmap
