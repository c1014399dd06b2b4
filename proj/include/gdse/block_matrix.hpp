#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace gdse {

// Square matrices of q x q blocks. t = 0 is the legal empty matrix, needed to
// represent the "rho = empty" initialization of the Onsager recursion.
struct BlockMatrix {
  int t = 0;
  int q = 0;
  std::vector<Eigen::MatrixXd> blocks;  // row-major t*t grid

  BlockMatrix() = default;
  BlockMatrix(int t_, int q_) : t(t_), q(q_) {
    if (t_ < 0 || q_ <= 0) throw std::invalid_argument("BlockMatrix: bad dims");
    blocks.assign(static_cast<size_t>(t_) * t_, Eigen::MatrixXd::Zero(q_, q_));
  }

  Eigen::MatrixXd& operator()(int r, int s) {
    return blocks[static_cast<size_t>(r) * t + s];
  }
  const Eigen::MatrixXd& operator()(int r, int s) const {
    return blocks[static_cast<size_t>(r) * t + s];
  }

  Eigen::MatrixXd flatten() const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(static_cast<long>(t) * q,
                                              static_cast<long>(t) * q);
    for (int r = 0; r < t; ++r)
      for (int s = 0; s < t; ++s)
        M.block(static_cast<long>(r) * q, static_cast<long>(s) * q, q, q) =
            (*this)(r, s);
    return M;
  }

  // Blockwise transpose: block (r,s) -> block(r,s)^T in place of itself.
  // This is the "element-wise transposed" right factor of rho*Sigma*rho_T,
  // not the full matrix transpose.
  BlockMatrix blockwise_transpose() const {
    BlockMatrix R(t, q);
    for (int r = 0; r < t; ++r)
      for (int s = 0; s < t; ++s) R(r, s) = (*this)(r, s).transpose();
    return R;
  }
};

inline BlockMatrix block_identity(int t, int q) {
  if (t < 1) throw std::invalid_argument("block_identity: t must be >= 1");
  BlockMatrix I(t, q);
  for (int r = 0; r < t; ++r) I(r, r) = Eigen::MatrixXd::Identity(q, q);
  return I;
}

// Shift embedding: zero first block-row and zero last block-column, with the
// input occupying the lower-left t x t sub-grid. The empty input maps to the
// single zero block.
inline BlockMatrix shift_embed(const BlockMatrix& N, int q_if_empty = 0) {
  int q = N.t > 0 ? N.q : q_if_empty;
  if (q <= 0) throw std::invalid_argument("shift_embed: unknown block size");
  BlockMatrix R(N.t + 1, q);
  for (int r = 0; r < N.t; ++r)
    for (int s = 0; s < N.t; ++s) R(r + 1, s) = N(r, s);
  return R;
}

inline BlockMatrix block_add(const BlockMatrix& A, const BlockMatrix& B) {
  if (A.t != B.t || A.q != B.q)
    throw std::invalid_argument("block_add: dimension mismatch");
  BlockMatrix R(A.t, A.q);
  for (size_t i = 0; i < R.blocks.size(); ++i)
    R.blocks[i] = A.blocks[i] + B.blocks[i];
  return R;
}

inline BlockMatrix block_scale(double a, const BlockMatrix& A) {
  BlockMatrix R(A.t, A.q);
  for (size_t i = 0; i < R.blocks.size(); ++i) R.blocks[i] = a * A.blocks[i];
  return R;
}

inline BlockMatrix block_matmul(const BlockMatrix& A, const BlockMatrix& B) {
  if (A.t != B.t || A.q != B.q)
    throw std::invalid_argument("block_matmul: dimension mismatch");
  BlockMatrix R(A.t, A.q);
  for (int r = 0; r < A.t; ++r)
    for (int s = 0; s < A.t; ++s)
      for (int u = 0; u < A.t; ++u) R(r, s).noalias() += A(r, u) * B(u, s);
  return R;
}

// Solve M X = B where M is the identity plus a strictly block-lower matrix.
// Exact block forward substitution; rejects any M violating the shape.
inline BlockMatrix solve_unit_lower(const BlockMatrix& M,
                                    const BlockMatrix& B) {
  if (M.t != B.t || M.q != B.q)
    throw std::invalid_argument("solve_unit_lower: dimension mismatch");
  const int t = M.t, q = M.q;
  const Eigen::MatrixXd Iq = Eigen::MatrixXd::Identity(q, q);
  for (int r = 0; r < t; ++r) {
    if ((M(r, r) - Iq).cwiseAbs().maxCoeff() != 0.0)
      throw std::invalid_argument("solve_unit_lower: diagonal block not I");
    for (int s = r + 1; s < t; ++s)
      if (M(r, s).cwiseAbs().maxCoeff() != 0.0)
        throw std::invalid_argument("solve_unit_lower: block above diagonal");
  }
  BlockMatrix X(t, q);
  for (int r = 0; r < t; ++r)
    for (int s = 0; s < t; ++s) {
      Eigen::MatrixXd acc = B(r, s);
      for (int u = 0; u < r; ++u) acc.noalias() -= M(r, u) * X(u, s);
      X(r, s) = acc;
    }
  return X;
}

}  // namespace gdse
