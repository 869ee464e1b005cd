#pragma once

// Inner loops shared by the serial and OpenMP kernels. Keeping one definition
// guarantees both paths perform the same additions in the same order.

#include <Eigen/Core>

namespace llmap::kernels::detail {

using Index = Eigen::Index;

inline double sum(const double* p, Index n) {
  double s = 0.0;
  for (Index k = 0; k < n; ++k) s += p[k];
  return s;
}

inline double dot(const double* a, const double* b, Index n) {
  double s = 0.0;
  for (Index k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

inline double sq_dist(const double* a, const double* b, Index n) {
  double s = 0.0;
  for (Index k = 0; k < n; ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

// Adds row `src` into the accumulator for columns [begin, end).
inline void accumulate(double* acc, const double* src, Index begin, Index end) {
  for (Index s = begin; s < end; ++s) acc[s] += src[s];
}

}  // namespace llmap::kernels::detail
