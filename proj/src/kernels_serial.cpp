#include "kernel_detail.hpp"
#include "llmap/kernels.hpp"

namespace llmap::kernels::serial {

using detail::Index;

Vector row_means(const Matrix& m) {
  Vector out(m.rows());
  for (Index i = 0; i < m.rows(); ++i) {
    out[i] = detail::sum(m.row(i).data(), m.cols()) / static_cast<double>(m.cols());
  }
  return out;
}

Vector col_means(const Matrix& m) {
  Vector out = Vector::Zero(m.cols());
  for (Index i = 0; i < m.rows(); ++i) detail::accumulate(out.data(), m.row(i).data(), 0, m.cols());
  out /= static_cast<double>(m.rows());
  return out;
}

Centered double_center(const Matrix& m) {
  Centered c;
  c.row_mean = row_means(m);
  c.xi.resize(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index s = 0; s < m.cols(); ++s) c.xi(i, s) = m(i, s) - c.row_mean[i];
  }
  c.col_mean = col_means(c.xi);
  c.q.resize(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index s = 0; s < m.cols(); ++s) c.q(i, s) = c.xi(i, s) - c.col_mean[s];
  }
  return c;
}

Matrix pairwise_sq_dist(const Matrix& rows) {
  const Index k = rows.rows();
  Matrix d = Matrix::Zero(k, k);
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
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j <= i; ++j) {
      const double v = detail::dot(rows.row(i).data(), rows.row(j).data(), rows.cols());
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

}  // namespace llmap::kernels::serial
