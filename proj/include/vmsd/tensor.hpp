#pragma once

// Mode-wise products on row-major (last index fastest) tensors stored in
// flat vectors. Used for sum-factorised evaluation on tensor quadrature grids
// and for Kronecker-structured mass solves.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "vmsd/basis.hpp"

namespace vmsd {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Dims = std::vector<Eigen::Index>;

inline Eigen::Index dims_product(const Dims& d) {
  return std::accumulate(d.begin(), d.end(), Eigen::Index{1}, std::multiplies<>());
}

/// out = (I x .. x A x .. x I) in, with A acting on index `mode`.
/// On return dims[mode] is replaced by A.rows().
template <class Matrix>
Eigen::VectorXd mode_product(const Eigen::VectorXd& in, Dims& dims, int mode, const Matrix& A) {
  Eigen::Index pre = 1, post = 1;
  for (int i = 0; i < mode; ++i) pre *= dims[i];
  for (std::size_t i = mode + 1; i < dims.size(); ++i) post *= dims[i];
  const Eigen::Index n = dims[mode], m = A.rows();
  if (A.cols() != n) throw InvariantError("mode_product: dimension mismatch");
  Eigen::VectorXd out(pre * m * post);
  if (post == 1) {
    Eigen::Map<const RowMatrix> X(in.data(), pre, n);
    Eigen::Map<RowMatrix> Y(out.data(), pre, m);
    Y = X * A.transpose();
  } else {
    for (Eigen::Index p = 0; p < pre; ++p) {
      Eigen::Map<const RowMatrix> X(in.data() + p * n * post, n, post);
      Eigen::Map<RowMatrix> Y(out.data() + p * m * post, m, post);
      Y = A * X;
    }
  }
  dims[mode] = m;
  return out;
}

/// Applies M^{-1} along one mode using a factorised SPD matrix.
inline Eigen::VectorXd mode_solve(const Eigen::VectorXd& in, const Dims& dims, int mode,
                                  const Eigen::SimplicialLDLT<SparseMatrix>& solver) {
  Eigen::Index pre = 1, post = 1;
  for (int i = 0; i < mode; ++i) pre *= dims[i];
  for (std::size_t i = mode + 1; i < dims.size(); ++i) post *= dims[i];
  const Eigen::Index n = dims[mode];
  Eigen::VectorXd out(in.size());
  Eigen::MatrixXd X(n, post);
  for (Eigen::Index p = 0; p < pre; ++p) {
    Eigen::Map<const RowMatrix> Xin(in.data() + p * n * post, n, post);
    X = Xin;
    Eigen::MatrixXd Y = solver.solve(X);
    Eigen::Map<RowMatrix> Yout(out.data() + p * n * post, n, post);
    Yout = Y;
  }
  return out;
}

/// Sparse Kronecker product A (x) B, row-major index ordering (A slow).
inline SparseMatrix kron(const SparseMatrix& A, const SparseMatrix& B) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(A.nonZeros()) * B.nonZeros());
  for (int ka = 0; ka < A.outerSize(); ++ka)
    for (SparseMatrix::InnerIterator ia(A, ka); ia; ++ia)
      for (int kb = 0; kb < B.outerSize(); ++kb)
        for (SparseMatrix::InnerIterator ib(B, kb); ib; ++ib)
          trip.emplace_back(static_cast<int>(ia.row() * B.rows() + ib.row()),
                            static_cast<int>(ia.col() * B.cols() + ib.col()), ia.value() * ib.value());
  SparseMatrix K(A.rows() * B.rows(), A.cols() * B.cols());
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

}  // namespace vmsd
