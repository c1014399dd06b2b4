#pragma once

#include <Eigen/Dense>
#include <random>
#include <stdexcept>

namespace gdse {

// Symmetrize and clip eigenvalues at zero (tolerance relative to the largest
// eigenvalue) before taking the symmetric square root. Eigenvalues below
// -hard_fail_tol * scale indicate a numerics failure, not MC jitter.
// ref_scale, when positive, overrides the internal scale estimate; used when
// C is a small Schur complement whose PSD tolerance should be judged against
// the unconditional covariance it was carved from.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& C, double tol = 1e-10,
                                double hard_fail_tol = 1e-6,
                                double ref_scale = -1.0) {
  Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd lam = es.eigenvalues();
  double scale = std::max(lam.cwiseAbs().maxCoeff(), 1.0);
  if (ref_scale > 0.0) scale = std::max(scale, ref_scale);
  if (lam.minCoeff() < -hard_fail_tol * scale)
    throw std::runtime_error("psd_sqrt: covariance far from PSD");
  Eigen::VectorXd root = lam.cwiseMax(0.0).cwiseSqrt();
  for (int i = 0; i < lam.size(); ++i)
    if (lam(i) < tol * scale) root(i) = 0.0;
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

// Pseudo-inverse with the same clipping, for conditioning on a (possibly
// rank-deficient) Gaussian past.
inline Eigen::MatrixXd psd_pinv(const Eigen::MatrixXd& C, double tol = 1e-10) {
  Eigen::MatrixXd S = 0.5 * (C + C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  Eigen::VectorXd lam = es.eigenvalues();
  double scale = std::max(lam.cwiseAbs().maxCoeff(), 1.0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
  for (int i = 0; i < lam.size(); ++i)
    if (lam(i) > tol * scale) inv(i) = 1.0 / lam(i);
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline Eigen::MatrixXd gaussian_matrix(int rows, int cols,
                                       std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::MatrixXd M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = nd(rng);
  return M;
}

}  // namespace gdse
