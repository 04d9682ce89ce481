#pragma once

#include "gae/core.hpp"

#include <algorithm>
#include <cmath>

namespace gae {

struct PcaModel {
  Vector mean;        // m
  Matrix components;  // m x l, orthonormal columns, descending variance
  Vector variances;   // l, sample variances (1/(n-1)) along each component

  Matrix transform(const Matrix& X) const {
    require(X.rows() == mean.size(), "pca: feature count mismatch");
    return components.transpose() * (X.colwise() - mean);
  }
};

/// Principal directions from the thin SVD of the centered data. Each
/// direction's sign makes its largest-magnitude entry positive.
inline PcaModel pca_fit(const Matrix& X, Index l) {
  const Index m = X.rows(), n = X.cols();
  require(n >= 2, "pca: need at least 2 samples");
  require(l >= 1 && l <= std::min(m, n), "pca: l must lie in 1..min(m, n)");
  PcaModel model;
  model.mean = X.rowwise().mean();
  const Matrix centered = X.colwise() - model.mean;
  if (centered.cwiseAbs().maxCoeff() == 0.0) throw InvalidInput("pca: data has zero variance");

  Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU);
  model.components = svd.matrixU().leftCols(l);
  model.variances = svd.singularValues().head(l).array().square() / static_cast<double>(n - 1);
  for (Index c = 0; c < l; ++c) {
    Index arg = 0;
    model.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(arg, c) < 0.0) model.components.col(c) *= -1.0;
  }
  return model;
}

inline Matrix pca_reduce(const Matrix& X, Index l) { return pca_fit(X, l).transform(X); }

}  // namespace gae
