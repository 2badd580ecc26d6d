#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "vmsd/errors.hpp"

namespace vmsd {

/// Gauss-Legendre rule on the reference interval [0, 1].
struct GaussRule {
  std::vector<double> points;
  std::vector<double> weights;
  int size() const { return static_cast<int>(points.size()); }
};

/// n-point Gauss-Legendre rule on [0,1] via Golub-Welsch.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw ConfigError("gauss_legendre: need at least one point");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    J(i, i - 1) = b;
    J(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  GaussRule r;
  r.points.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    r.points[i] = 0.5 * (es.eigenvalues()(i) + 1.0);
    r.weights[i] = v0 * v0;  // 2 v0^2 on [-1,1], halved for [0,1]
  }
  // Symmetrise to kill eigen-solver round-off.
  for (int i = 0; i < n / 2; ++i) {
    const double p = 0.5 * (r.points[i] + 1.0 - r.points[n - 1 - i]);
    const double w = 0.5 * (r.weights[i] + r.weights[n - 1 - i]);
    r.points[i] = p;
    r.points[n - 1 - i] = 1.0 - p;
    r.weights[i] = r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.points[n / 2] = 0.5;
  const double s = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
  for (double& w : r.weights) w /= s;
  return r;
}

/// Points per coordinate used for phase-space and field integrals of degree-k data:
/// ceil((2k+4)/2) = k+2, enough for the v-hat weighted moments.
inline int default_points_per_coordinate(int degree) { return degree + 2; }

/// A Gauss rule repeated over every cell of a 1D node vector.
struct CellQuadrature {
  std::vector<double> points;   // cells * nq, cell-major
  std::vector<double> weights;  // physical weights
  int per_cell = 0;
  int cells = 0;
  int size() const { return static_cast<int>(points.size()); }
};

inline CellQuadrature cell_quadrature(const std::vector<double>& nodes, const GaussRule& rule) {
  CellQuadrature q;
  q.per_cell = rule.size();
  q.cells = static_cast<int>(nodes.size()) - 1;
  q.points.reserve(static_cast<std::size_t>(q.cells) * q.per_cell);
  q.weights.reserve(q.points.capacity());
  for (int c = 0; c < q.cells; ++c) {
    const double a = nodes[c], len = nodes[c + 1] - nodes[c];
    for (int j = 0; j < rule.size(); ++j) {
      q.points.push_back(a + len * rule.points[j]);
      q.weights.push_back(len * rule.weights[j]);
    }
  }
  return q;
}

}  // namespace vmsd
