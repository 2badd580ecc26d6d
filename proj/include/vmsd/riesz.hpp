#pragma once

// H^{-1} norms by Riesz representation on a tensor reference mesh.
//
// ||u||_{-1} = sup (u, psi) / ||psi||_{H^1} over psi in H^1_0. The supremum is
// taken over continuous Q1 functions on a uniform grid, which turns it into
// b^T A^{-1} b with A the H^1 Gram matrix (stiffness + mass) and b the load
// vector of u. On a tensor grid A = sum_d (K_d (x) prod M) + prod M, which
// the per-direction generalised eigenvectors (K_d V = M_d V Lambda,
// V^T M_d V = I) diagonalise: b^T A^{-1} b = sum_j ((V^T (x) .. V^T) b)_j^2 / (1 + sum_d lambda_j).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <functional>
#include <vector>

#include "vmsd/basis.hpp"
#include "vmsd/errors.hpp"
#include "vmsd/mesh.hpp"
#include "vmsd/quadrature.hpp"
#include "vmsd/tensor.hpp"

namespace vmsd {

class RieszNorm {
 public:
  /// Plane filler: for the q-th quadrature point s of the first direction,
  /// write u on the tensor grid of the remaining directions' quadrature
  /// points (row-major) into `plane`.
  using PlaneFill = std::function<void(int q, double s, Eigen::Ref<Eigen::VectorXd> plane)>;

  /// `cells` per direction of the reference grid; `points` Gauss points per cell.
  RieszNorm(std::vector<Interval> box, std::vector<int> cells, int points = 3) : box_(std::move(box)) {
    if (box_.empty() || box_.size() > 3 || box_.size() != cells.size()) throw ConfigError("RieszNorm: 1 to 3 directions");
    const GaussRule rule = gauss_legendre(points);
    for (std::size_t d = 0; d < box_.size(); ++d) {
      if (cells[d] < 2) throw ConfigError("RieszNorm: need at least two reference cells per direction");
      Dir D{ConformingSpace1D(detail::uniform_nodes(box_[d].lo, box_[d].hi, cells[d]), 1), {}, {}, {}, {}};
      D.quad = cell_quadrature(D.space.nodes(), rule);
      const SparseMatrix E = D.space.eval_matrix(D.quad.points, 0);
      const SparseMatrix Dv = D.space.eval_matrix(D.quad.points, 1);
      Eigen::Map<const Eigen::VectorXd> w(D.quad.weights.data(), D.quad.size());
      D.test = SparseMatrix(E.transpose() * w.asDiagonal());
      const Eigen::MatrixXd M = Eigen::MatrixXd(weighted_gram(E, D.quad.weights, E));
      const Eigen::MatrixXd K = Eigen::MatrixXd(weighted_gram(Dv, D.quad.weights, Dv));
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(K, M);
      if (es.info() != Eigen::Success) throw InvariantError("RieszNorm: eigensolver failed");
      D.VT = es.eigenvectors().transpose();
      D.lambda = es.eigenvalues();
      dirs_.push_back(std::move(D));
    }
  }

  /// Reference grid `factor` times finer than the solution grid in every
  /// direction. Throws if that would be coarser than the solution grid.
  static RieszNorm refined(std::vector<Interval> box, const std::vector<int>& solution_cells, int factor = 4, int points = 3) {
    if (factor < 1) throw ConfigError("RieszNorm: reference mesh coarser than solution mesh");
    std::vector<int> cells;
    for (int c : solution_cells) cells.push_back(std::max(2, c * factor));
    return RieszNorm(std::move(box), std::move(cells), points);
  }

  /// Checks the reference grid against a solution grid.
  void require_finer_than(const std::vector<int>& solution_cells) const {
    for (std::size_t d = 0; d < dirs_.size(); ++d)
      if (dirs_[d].space.cells() < solution_cells.at(d)) throw ConfigError("RieszNorm: reference mesh coarser than solution mesh");
  }

  int dimensions() const { return static_cast<int>(dirs_.size()); }
  const std::vector<double>& points(int d) const { return dirs_[d].quad.points; }
  Eigen::Index plane_size() const {
    Eigen::Index n = 1;
    for (std::size_t d = 1; d < dirs_.size(); ++d) n *= dirs_[d].quad.size();
    return n;
  }

  /// ||u||_{H^{-1}} for u given plane by plane.
  double norm(const PlaneFill& fill) const { return std::sqrt(std::max(0.0, norm_squared(load(fill)))); }

  /// ||u||_{H^{-1}} for a pointwise callable on the box.
  double norm(const std::function<double(const std::array<double, 3>&)>& u) const {
    return norm([&](int, double s, Eigen::Ref<Eigen::VectorXd> plane) {
      std::array<double, 3> p{s, 0.0, 0.0};
      if (dirs_.size() == 1) {
        plane[0] = u(p);
      } else if (dirs_.size() == 2) {
        for (int j = 0; j < dirs_[1].quad.size(); ++j) {
          p[1] = dirs_[1].quad.points[j];
          plane[j] = u(p);
        }
      } else {
        const int n2 = dirs_[2].quad.size();
        for (int j = 0; j < dirs_[1].quad.size(); ++j)
          for (int k = 0; k < n2; ++k) {
            p[1] = dirs_[1].quad.points[j];
            p[2] = dirs_[2].quad.points[k];
            plane[static_cast<Eigen::Index>(j) * n2 + k] = u(p);
          }
      }
    });
  }

  /// Load vector (u, phi_j) on the interior reference dofs.
  Eigen::VectorXd load(const PlaneFill& fill) const {
    Dims inner;
    for (std::size_t d = 1; d < dirs_.size(); ++d) inner.push_back(dirs_[d].quad.size());
    Eigen::Index inner_dofs = 1;
    for (std::size_t d = 1; d < dirs_.size(); ++d) inner_dofs *= dirs_[d].space.dofs();
    const Dir& D0 = dirs_[0];
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(D0.space.dofs()) * inner_dofs);
    Eigen::VectorXd plane(plane_size());
    for (int q = 0; q < D0.quad.size(); ++q) {
      plane.setZero();
      fill(q, D0.quad.points[q], plane);
      Eigen::VectorXd red = plane;
      Dims d = inner;
      for (std::size_t k = 1; k < dirs_.size(); ++k) red = mode_product(red, d, static_cast<int>(k - 1), dirs_[k].test);
      for (SparseMatrix::InnerIterator it(D0.test, q); it; ++it) b.segment(it.row() * inner_dofs, inner_dofs) += it.value() * red;
    }
    return b;
  }

  /// b^T A^{-1} b.
  double norm_squared(const Eigen::VectorXd& b) const {
    Dims d;
    for (const auto& D : dirs_) d.push_back(D.space.dofs());
    Eigen::VectorXd c = b;
    for (std::size_t k = 0; k < dirs_.size(); ++k) c = mode_product(c, d, static_cast<int>(k), dirs_[k].VT);
    double s = 0.0;
    // Iterate the multi-index in row-major order to accumulate 1 + sum lambda.
    const Eigen::Index n = c.size();
    std::vector<Eigen::Index> idx(dirs_.size(), 0);
    for (Eigen::Index j = 0; j < n; ++j) {
      double den = 1.0;
      for (std::size_t k = 0; k < dirs_.size(); ++k) den += dirs_[k].lambda[idx[k]];
      s += c[j] * c[j] / den;
      for (int k = static_cast<int>(dirs_.size()) - 1; k >= 0; --k) {
        if (++idx[k] < d[k]) break;
        idx[k] = 0;
      }
    }
    return s;
  }

 private:
  struct Dir {
    ConformingSpace1D space;
    CellQuadrature quad;
    SparseMatrix test;  // dofs x quad points, E^T diag(w)
    Eigen::MatrixXd VT;
    Eigen::VectorXd lambda;
  };
  std::vector<Interval> box_;
  std::vector<Dir> dirs_;
};

/// ||u||_{H^{-1}(a,b)} of a 1D callable with a reference grid of `cells` cells.
inline double h_minus_one_norm(const std::function<double(double)>& u, Interval I, int cells) {
  RieszNorm R({I}, {cells});
  return R.norm([&](const std::array<double, 3>& p) { return u(p[0]); });
}

}  // namespace vmsd
