#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <utility>
#include <vector>

namespace cobras {

// Sum of row Euclidean norms.
template <typename Derived>
double l21_norm(const Eigen::MatrixBase<Derived>& X) {
  return X.rowwise().norm().sum();
}

// Sum of singular values.
template <typename Derived>
double nuclear_norm(const Eigen::MatrixBase<Derived>& Q) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Q.eval());
  return svd.singularValues().sum();
}

// Sum of per-block nuclear norms for K stacked blocks.
inline double lnuc1_norm(const std::vector<Eigen::MatrixXcd>& blocks) {
  double total = 0.0;
  for (const auto& block : blocks) total += nuclear_norm(block);
  return total;
}

// Balanced factorization Q = Gamma * G with Gamma = U S^{1/2}, G = S^{1/2} V^H
// from the thin SVD; attains (||Gamma||_F^2 + ||G||_F^2) / 2 = ||Q||_*.
inline std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> lemma1_factors(const Eigen::MatrixXcd& Q) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(Q, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd roots = svd.singularValues().cwiseSqrt();
  Eigen::MatrixXcd gamma = svd.matrixU() * roots.asDiagonal();
  Eigen::MatrixXcd g = roots.asDiagonal() * svd.matrixV().adjoint();
  return {std::move(gamma), std::move(g)};
}

}  // namespace cobras
