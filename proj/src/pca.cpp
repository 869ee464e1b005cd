#include <Eigen/SVD>

#include <cmath>

#include "llmap/error.hpp"
#include "llmap/kernels.hpp"
#include "llmap/mapping.hpp"

namespace llmap {

PcaResult pca(const Matrix& x, std::size_t dims, std::vector<std::string> model_ids) {
  const auto k = x.rows();
  const auto n = x.cols();
  const auto rank_cap = static_cast<std::size_t>(std::min(k, n));
  if (dims < 1 || dims > rank_cap) {
    throw ConfigError("PCA dims must be in [1, " + std::to_string(rank_cap) + "]");
  }
  if (!x.allFinite()) throw DataError("PCA input contains non-finite values");

  PcaResult out;
  out.column_mean = kernels::parallel::col_means(x);
  const Eigen::MatrixXd centered = x.rowwise() - out.column_mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Eigen::MatrixXd v = svd.matrixV();

  double total = 0.0;
  for (Eigen::Index c = 0; c < sv.size(); ++c) total += sv(c) * sv(c);
  if (!(total > 0.0)) throw DataError("PCA input has zero variance");
  double running = 0.0;
  for (Eigen::Index c = 0; c < sv.size(); ++c) {
    out.spectrum.singular_values.push_back(sv(c));
    running += sv(c) * sv(c);
    out.spectrum.cumulative_ratio.push_back(running / total);
  }
  out.spectrum.cumulative_ratio.back() = 1.0;

  const auto d = static_cast<Eigen::Index>(dims);
  for (Eigen::Index c = 0; c < d; ++c) {
    Eigen::Index arg = 0;
    for (Eigen::Index r = 1; r < n; ++r) {
      if (std::abs(v(r, c)) > std::abs(v(arg, c))) arg = r;
    }
    if (v(arg, c) < 0.0) v.col(c) *= -1.0;
  }
  out.components = v.leftCols(d).transpose();
  out.embedding.coords = centered * v.leftCols(d);
  out.embedding.model_ids = std::move(model_ids);
  out.embedding.method = "pca";
  out.embedding.params["dims"] = static_cast<double>(dims);
  return out;
}

}  // namespace llmap
