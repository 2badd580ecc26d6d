#pragma once

// One-dimensional Lagrange elements. Phase-space and field spaces are tensor
// products of these.

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vmsd/errors.hpp"
#include "vmsd/quadrature.hpp"

namespace vmsd {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Lagrange shape functions of degree k on [0,1] with equispaced nodes j/k.
/// Degree 0 is the single constant function (node at 1/2).
class Lagrange1D {
 public:
  explicit Lagrange1D(int degree) : k_(degree) {
    if (degree < 0 || degree > 3) throw ConfigError("polynomial degree must be in 0..3");
    nodes_.resize(size());
    if (k_ == 0) {
      nodes_[0] = 0.5;
    } else {
      for (int j = 0; j <= k_; ++j) nodes_[j] = static_cast<double>(j) / k_;
    }
  }

  int degree() const { return k_; }
  int size() const { return k_ + 1; }
  double node(int j) const { return nodes_[j]; }

  double value(int j, double xi) const {
    double p = 1.0;
    for (int m = 0; m <= k_; ++m)
      if (m != j) p *= (xi - nodes_[m]) / (nodes_[j] - nodes_[m]);
    return p;
  }

  /// d/dxi on the reference interval.
  double derivative(int j, double xi) const {
    double s = 0.0;
    for (int l = 0; l <= k_; ++l) {
      if (l == j) continue;
      double p = 1.0 / (nodes_[j] - nodes_[l]);
      for (int m = 0; m <= k_; ++m)
        if (m != j && m != l) p *= (xi - nodes_[m]) / (nodes_[j] - nodes_[m]);
      s += p;
    }
    return s;
  }

 private:
  int k_;
  std::vector<double> nodes_;
};

/// Continuous piecewise degree-k functions on a 1D grid with zero trace at
/// both end points (the H^1_0 conforming space).
class ConformingSpace1D {
 public:
  ConformingSpace1D(std::vector<double> nodes, int degree) : nodes_(std::move(nodes)), shape_(degree) {
    if (nodes_.size() < 2) throw ConfigError("ConformingSpace1D: need at least one cell");
  }

  int degree() const { return shape_.degree(); }
  int cells() const { return static_cast<int>(nodes_.size()) - 1; }
  const std::vector<double>& nodes() const { return nodes_; }
  const Lagrange1D& shape() const { return shape_; }
  double lo() const { return nodes_.front(); }
  double hi() const { return nodes_.back(); }

  /// Interior degrees of freedom; degree 0 has none (constants cannot vanish on the boundary).
  int dofs() const { return degree() == 0 ? 0 : cells() * degree() - 1; }

  /// Global dof of local shape j on a cell, or -1 on the boundary.
  int dof_of(int cell, int j) const {
    if (degree() == 0) return -1;
    const int g = cell * degree() + j;
    return (g == 0 || g == cells() * degree()) ? -1 : g - 1;
  }

  /// Coordinate of a dof (a Lagrange node).
  double dof_coordinate(int dof) const {
    const int g = dof + 1;
    const int c = std::min(g / degree(), cells() - 1);
    const int j = g - c * degree();
    return nodes_[c] + (nodes_[c + 1] - nodes_[c]) * shape_.node(j);
  }

  /// Cell index and reference coordinate of s. Points within a relative
  /// round-off of the boundary are clamped in.
  std::pair<int, double> locate(double s) const {
    const double slack = 1e-12 * (hi() - lo());
    if (s < lo() - slack || s > hi() + slack) throw DomainError("point " + std::to_string(s) + " outside grid");
    s = std::clamp(s, lo(), hi());
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), s);
    int c = static_cast<int>(it - nodes_.begin()) - 1;
    c = std::clamp(c, 0, cells() - 1);
    const double xi = (s - nodes_[c]) / (nodes_[c + 1] - nodes_[c]);
    return {c, xi};
  }

  /// Rows: points; columns: dofs. deriv = 0 for values, 1 for d/ds.
  SparseMatrix eval_matrix(std::span<const double> points, int deriv = 0) const {
    std::vector<Triplet> trip;
    trip.reserve(points.size() * shape_.size());
    for (std::size_t p = 0; p < points.size(); ++p) {
      const auto [c, xi] = locate(points[p]);
      const double scale = deriv ? 1.0 / (nodes_[c + 1] - nodes_[c]) : 1.0;
      for (int j = 0; j < shape_.size(); ++j) {
        const int d = dof_of(c, j);
        if (d < 0) continue;
        const double val = deriv ? shape_.derivative(j, xi) * scale : shape_.value(j, xi);
        trip.emplace_back(static_cast<int>(p), d, val);
      }
    }
    SparseMatrix E(static_cast<int>(points.size()), dofs());
    E.setFromTriplets(trip.begin(), trip.end());
    return E;
  }

  /// Point evaluation of a coefficient vector.
  template <class Coeffs>
  double evaluate(const Coeffs& c, double s, int deriv = 0) const {
    const auto [cell, xi] = locate(s);
    const double scale = deriv ? 1.0 / (nodes_[cell + 1] - nodes_[cell]) : 1.0;
    double v = 0.0;
    for (int j = 0; j < shape_.size(); ++j) {
      const int d = dof_of(cell, j);
      if (d < 0) continue;
      v += c[d] * (deriv ? shape_.derivative(j, xi) * scale : shape_.value(j, xi));
    }
    return v;
  }

 private:
  std::vector<double> nodes_;
  Lagrange1D shape_;
};

/// Degree-k polynomials in time on a single slab [t0, t1] (no continuity
/// constraint: traces may jump between slabs).
class SlabTimeBasis {
 public:
  explicit SlabTimeBasis(int degree) : shape_(degree) {}

  int size() const { return shape_.size(); }
  const Lagrange1D& shape() const { return shape_; }

  /// Values (deriv=0) or d/dt (deriv=1) at reference points xi in [0,1] on a
  /// slab of length len. Rows: points.
  SparseMatrix eval_matrix(std::span<const double> xi, double len, int deriv = 0) const {
    std::vector<Triplet> trip;
    for (std::size_t p = 0; p < xi.size(); ++p)
      for (int a = 0; a < size(); ++a) {
        const double v = deriv ? shape_.derivative(a, xi[p]) / len : shape_.value(a, xi[p]);
        if (v != 0.0) trip.emplace_back(static_cast<int>(p), a, v);
      }
    SparseMatrix E(static_cast<int>(xi.size()), size());
    E.setFromTriplets(trip.begin(), trip.end());
    return E;
  }

  /// Basis values at a reference point.
  std::vector<double> values(double xi) const {
    std::vector<double> v(size());
    for (int a = 0; a < size(); ++a) v[a] = shape_.value(a, xi);
    return v;
  }
  std::vector<double> derivatives(double xi, double len) const {
    std::vector<double> v(size());
    for (int a = 0; a < size(); ++a) v[a] = shape_.derivative(a, xi) / len;
    return v;
  }

 private:
  Lagrange1D shape_;
};

/// Gram matrix E^T diag(w) F.
inline SparseMatrix weighted_gram(const SparseMatrix& E, std::span<const double> w, const SparseMatrix& F) {
  Eigen::Map<const Eigen::VectorXd> wv(w.data(), static_cast<Eigen::Index>(w.size()));
  SparseMatrix WF = wv.asDiagonal() * F;
  SparseMatrix G = E.transpose() * WF;
  G.prune(0.0);
  return G;
}

}  // namespace vmsd
