#pragma once

#include <cmath>

#include "llmap/rng.hpp"
#include "llmap/types.hpp"

namespace testutil {

inline llmap::Matrix random_matrix(llmap::SplitMix64& rng, Eigen::Index rows, Eigen::Index cols,
                                   double scale = 1.0, double shift = 0.0) {
  llmap::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = shift + scale * rng.normal();
  }
  return m;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1.0});
  return std::abs(a - b) / scale;
}

inline double max_abs(const llmap::Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace testutil
