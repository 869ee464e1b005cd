#pragma once

// Data-parallel kernels behind the matrix pipeline.
//
// Each kernel exists twice: `serial` is the plain reference implementation and
// `parallel` is the OpenMP version the library uses. Every output element is
// reduced by a single thread in the same index order as the reference, so the
// two agree bit for bit regardless of thread count (tests assert equality).

#include "llmap/types.hpp"

namespace llmap::kernels {

struct Centered {
  Vector row_mean;
  Matrix xi;
  Vector col_mean;
  Matrix q;
};

namespace serial {

Vector row_means(const Matrix& m);
Vector col_means(const Matrix& m);
Centered double_center(const Matrix& m);
/// Symmetric matrix of squared Euclidean distances between rows; zero diagonal.
Matrix pairwise_sq_dist(const Matrix& rows);
/// rows * rows^T.
Matrix gram(const Matrix& rows);

}  // namespace serial

namespace parallel {

Vector row_means(const Matrix& m);
Vector col_means(const Matrix& m);
Centered double_center(const Matrix& m);
Matrix pairwise_sq_dist(const Matrix& rows);
Matrix gram(const Matrix& rows);

}  // namespace parallel

}  // namespace llmap::kernels
