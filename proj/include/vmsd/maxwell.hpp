#pragma once

// Space-time streamline-diffusion solver for the compact Maxwell system
//   M1 W_t + M2 W_x = b,  W = (E1, E2, B),  b = (rho, -j1, -j2, 0),
// one slab at a time, with upwind coupling through the slab-start trace.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <array>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vmsd/errors.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/moments.hpp"
#include "vmsd/tensor.hpp"

namespace vmsd {

/// Stabilisation policy shared by the field and distribution solvers.
struct SDParameters {
  double c_delta = 0.5;
  double solver_tol = 1e-10;
  double delta(double h) const { return c_delta * h; }
};

/// The fixed 0/1 matrices of the compact form and the hat map.
struct ConstantMatrices {
  static Eigen::Matrix<double, 4, 3> M1() {
    Eigen::Matrix<double, 4, 3> M;
    M << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
    return M;
  }
  static Eigen::Matrix<double, 4, 3> M2() {
    Eigen::Matrix<double, 4, 3> M;
    M << 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0;
    return M;
  }
  /// g -> (g1, g1, g2, g3).
  static Eigen::Vector4d hat(const Eigen::Vector3d& g) { return {g[0], g[0], g[1], g[2]}; }
};

/// Discrete field history: one slab function per slab plus the data trace
/// W_-(t_0) (the projection of W^0).
struct FieldHistory {
  Eigen::VectorXd initial;
  std::vector<SlabFunction> slabs;
};

/// Assembled slab system A w = rhs.
struct SlabSystem {
  SparseMatrix A;
  Eigen::VectorXd rhs;
};

namespace detail {

struct Block {
  int row, col;
  SparseMatrix M;
};

inline SparseMatrix block_sparse(int row_blocks, int col_blocks, int block_rows, int block_cols, const std::vector<Block>& blocks) {
  std::vector<Triplet> trip;
  for (const auto& b : blocks)
    for (int k = 0; k < b.M.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(b.M, k); it; ++it)
        trip.emplace_back(b.row * block_rows + static_cast<int>(it.row()), b.col * block_cols + static_cast<int>(it.col()), it.value());
  SparseMatrix S(row_blocks * block_rows, col_blocks * block_cols);
  S.setFromTriplets(trip.begin(), trip.end());
  return S;
}

inline SparseMatrix column_vector(const std::vector<double>& v) {
  SparseMatrix s(static_cast<int>(v.size()), 1);
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0.0) trip.emplace_back(static_cast<int>(i), 0, v[i]);
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

}  // namespace detail

/// Quadrature-grid operators of one slab: values, t- and x-derivatives of
/// each component as (nqt*nqx) x (nt*nxd) matrices.
struct FieldSlabOperators {
  SparseMatrix value, dt, dx;
  SparseMatrix L, test;  // 4 nq x 3 n: operator rows and SD test rows
  Eigen::VectorXd w4;    // quadrature weights repeated per row
};

class MaxwellSolver {
 public:
  /// h is the field-cylinder mesh parameter (diam of I_m x tau_x).
  MaxwellSolver(const FieldSpace& space, double h, SDParameters params)
      : V_(space), h_(h), params_(params), delta_(params.delta(h)) {
    const auto& x = V_.x_axis();
    const SparseMatrix e = detail::column_vector(V_.t_axis().start);
    start_mass_ = kron(e, x.mass);
    jump_ = kron(SparseMatrix(e * e.transpose()), x.mass);
  }

  const FieldSpace& space() const { return V_; }
  double delta() const { return delta_; }
  double h() const { return h_; }

  FieldSlabOperators operators(int m) const {
    const double len = V_.time().length(m);
    const auto& x = V_.x_axis();
    const auto& t = V_.t_axis();
    FieldSlabOperators op;
    op.value = kron(t.E, x.E);
    op.dt = kron(t.D(len), x.E);
    op.dx = kron(t.E, x.D);
    const int nq = static_cast<int>(op.value.rows()), n = V_.component_size();
    op.L = detail::block_sparse(4, 3, nq, n, {{0, 0, op.dx}, {1, 0, op.dt}, {2, 1, op.dt}, {2, 2, op.dx}, {3, 2, op.dt}, {3, 1, op.dx}});
    const SparseMatrix hat = detail::block_sparse(4, 3, nq, n, {{0, 0, op.value}, {1, 0, op.value}, {2, 1, op.value}, {3, 2, op.value}});
    op.test = hat + delta_ * op.L;
    const Eigen::VectorXd w = V_.weights(m);
    op.w4 = w.replicate(4, 1);
    return op;
  }

  /// The slab system for slab m with sources b (on the slab quadrature grid)
  /// and incoming trace W_in = W_-(t_{m-1}).
  SlabSystem assemble_slab(int m, const SlabMoments& b, const Eigen::VectorXd& W_in) const {
    const FieldSlabOperators op = operators(m);
    SlabSystem sys;
    sys.A = matrix(op);
    sys.rhs = rhs(op, b, W_in);
    return sys;
  }

  /// Solves one slab; factorisations are reused for equal slab lengths.
  SlabFunction solve_slab(int m, const SlabMoments& b, const Eigen::VectorXd& W_in) const {
    SlabFunction out = V_.zero(m);
    if (V_.slab_size() == 0) return out;
    const FieldSlabOperators op = operators(m);
    const Eigen::VectorXd r = rhs(op, b, W_in);
    if (r.lpNorm<Eigen::Infinity>() == 0.0) return out;
    const auto& lu = factor(m, op);
    out.coeffs = lu.solve(r);
    if (lu.info() != Eigen::Success) throw ConfigError("maxwell: solve failed on slab " + std::to_string(m));
    return out;
  }

  /// Sequential slab solves with W_-(t_0) = P W^0.
  FieldHistory march(const Eigen::VectorXd& W0_trace, const SourceMoments& b) const {
    FieldHistory H;
    H.initial = W0_trace;
    Eigen::VectorXd in = W0_trace;
    for (int m = 1; m <= V_.time().slabs(); ++m) {
      H.slabs.push_back(solve_slab(m, b.slabs.at(m - 1), in));
      in = V_.trace(H.slabs.back(), true);
    }
    return H;
  }

  /// b = (rho, -j1, -j2, 0) on the quadrature grid, stacked by row.
  static Eigen::VectorXd source_rows(const SlabMoments& b) {
    const Eigen::Index nq = b.rho.size();
    Eigen::VectorXd s = Eigen::VectorXd::Zero(4 * nq);
    s.segment(0, nq) = b.rho;
    s.segment(nq, nq) = -b.j1;
    s.segment(2 * nq, nq) = -b.j2;
    return s;
  }

 private:
  SparseMatrix matrix(const FieldSlabOperators& op) const {
    SparseMatrix A = SparseMatrix(op.test.transpose()) * (op.w4.asDiagonal() * op.L);
    const int n = V_.component_size();
    A += detail::block_sparse(3, 3, n, n, {{0, 0, jump_}, {1, 1, jump_}, {2, 2, jump_}});
    A.prune(0.0);
    return A;
  }

  Eigen::VectorXd rhs(const FieldSlabOperators& op, const SlabMoments& b, const Eigen::VectorXd& W_in) const {
    Eigen::VectorXd r = op.test.transpose() * op.w4.cwiseProduct(source_rows(b));
    const int n = V_.component_size(), nx = V_.nxd();
    for (int c = 0; c < 3; ++c) r.segment(static_cast<Eigen::Index>(c) * n, n) += start_mass_ * W_in.segment(static_cast<Eigen::Index>(c) * nx, nx);
    return r;
  }

  const Eigen::SparseLU<SparseMatrix>& factor(int m, const FieldSlabOperators& op) const {
    const double len = V_.time().length(m);
    auto it = cache_.find(len);
    if (it != cache_.end()) return *it->second;
    auto lu = std::make_shared<Eigen::SparseLU<SparseMatrix>>();
    SparseMatrix A = matrix(op);
    A.makeCompressed();
    lu->compute(A);
    if (lu->info() != Eigen::Success) throw ConfigError("maxwell: singular system on slab " + std::to_string(m));
    cache_.emplace(len, lu);
    return *lu;
  }

  const FieldSpace& V_;
  double h_;
  SDParameters params_;
  double delta_;
  SparseMatrix start_mass_;  // (e_start (x) M_x): slab dofs x trace dofs, one component
  SparseMatrix jump_;        // (e_start e_start^T (x) M_x), one component
  mutable std::map<double, std::shared_ptr<Eigen::SparseLU<SparseMatrix>>> cache_;
};

/// Per-slab ||d_x E1 - rho||_{L2(S_m)} on the slab quadrature grid.
inline std::vector<double> gauss_law_residual(const FieldSpace& V, const FieldHistory& W, const SourceMoments& b) {
  std::vector<double> out;
  for (std::size_t m = 0; m < W.slabs.size(); ++m) {
    const Eigen::VectorXd dE1 = V.on_quadrature(W.slabs[m], 0, 0, 1);
    const Eigen::VectorXd w = V.weights(W.slabs[m].slab);
    const Eigen::VectorXd r = dE1 - b.slabs.at(m).rho;
    out.push_back(std::sqrt(w.dot(r.cwiseAbs2())));
  }
  return out;
}

}  // namespace vmsd
