#include <omp.h>

#include <algorithm>

#include "kernel_detail.hpp"
#include "llmap/kernels.hpp"

namespace llmap::kernels::parallel {

using detail::Index;

namespace {

constexpr Index kColumnBlock = 512;

}  // namespace

Vector row_means(const Matrix& m) {
  Vector out(m.rows());
  const Index rows = m.rows();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    out[i] = detail::sum(m.row(i).data(), m.cols()) / static_cast<double>(m.cols());
  }
  return out;
}

// Column blocks are independent; inside a block rows are added in ascending
// order, which is the reference order.
Vector col_means(const Matrix& m) {
  Vector out = Vector::Zero(m.cols());
  const Index cols = m.cols();
  const Index blocks = (cols + kColumnBlock - 1) / kColumnBlock;
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < blocks; ++b) {
    const Index begin = b * kColumnBlock;
    const Index end = std::min(cols, begin + kColumnBlock);
    for (Index i = 0; i < m.rows(); ++i) detail::accumulate(out.data(), m.row(i).data(), begin, end);
  }
  out /= static_cast<double>(m.rows());
  return out;
}

Centered double_center(const Matrix& m) {
  Centered c;
  c.row_mean = row_means(m);
  c.xi.resize(m.rows(), m.cols());
  const Index rows = m.rows();
  const Index cols = m.cols();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    for (Index s = 0; s < cols; ++s) c.xi(i, s) = m(i, s) - c.row_mean[i];
  }
  c.col_mean = col_means(c.xi);
  c.q.resize(rows, cols);
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < rows; ++i) {
    for (Index s = 0; s < cols; ++s) c.q(i, s) = c.xi(i, s) - c.col_mean[s];
  }
  return c;
}

Matrix pairwise_sq_dist(const Matrix& rows) {
  const Index k = rows.rows();
  Matrix d = Matrix::Zero(k, k);
#pragma omp parallel for schedule(dynamic, 1)
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      const double v = detail::sq_dist(rows.row(i).data(), rows.row(j).data(), rows.cols());
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return d;
}

Matrix gram(const Matrix& rows) {
  const Index k = rows.rows();
  Matrix g(k, k);
#pragma omp parallel for schedule(dynamic, 1)
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = detail::dot(rows.row(i).data(), rows.row(j).data(), rows.cols());
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

}  // namespace llmap::kernels::parallel
