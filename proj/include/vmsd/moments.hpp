#pragma once

// Velocity moments of the distribution: charge and current densities, the
// neutralising background and the compatible initial E1.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <sstream>
#include <memory>
#include <vector>

#include "vmsd/errors.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/quadrature.hpp"

namespace vmsd {

/// Relativistic velocity v / sqrt(1 + |v|^2) (unit mass and light speed).
inline std::array<double, 2> hat_velocity(double v1, double v2) {
  const double g = std::sqrt(1.0 + v1 * v1 + v2 * v2);
  return {v1 / g, v2 / g};
}

/// d vhat_i / d v_j, row i.
inline std::array<std::array<double, 2>, 2> hat_velocity_jacobian(double v1, double v2) {
  const double s = 1.0 + v1 * v1 + v2 * v2;
  const double g = std::sqrt(s), g3 = s * g;
  return {{{1.0 / g - v1 * v1 / g3, -v1 * v2 / g3}, {-v1 * v2 / g3, 1.0 / g - v2 * v2 / g3}}};
}

using SpatialField = std::function<double(double x)>;

inline SpatialField zero_field() {
  return [](double) { return 0.0; };
}

/// Moment tables on one slab, sampled on the (t,x) quadrature grid [qt][qx].
struct SlabMoments {
  Eigen::VectorXd rho, j1, j2;
};

/// Charge and current densities for every slab, plus the background used.
/// The Maxwell right-hand side is b = (rho, -j1, -j2, 0).
struct SourceMoments {
  std::vector<SlabMoments> slabs;  // index m-1
  SpatialField rho_b = zero_field();

  static SourceMoments zeros(int slabs, Eigen::Index points) {
    SourceMoments s;
    s.slabs.assign(slabs, {Eigen::VectorXd::Zero(points), Eigen::VectorXd::Zero(points), Eigen::VectorXd::Zero(points)});
    return s;
  }
};

/// Per-x-quadrature-point moments at a fixed time.
struct MomentSnapshot {
  std::vector<double> x;
  Eigen::VectorXd density, rho, j1, j2;  // density = int f dv
};

namespace detail {

/// vhat on the velocity quadrature grid, [q1][q2].
struct VelocityGrid {
  Eigen::VectorXd w, vh1, vh2;
  explicit VelocityGrid(const PhaseSpace& V) {
    const auto& p1 = V.v1_axis().quad;
    const auto& p2 = V.v2_axis().quad;
    const Eigen::Index n = static_cast<Eigen::Index>(p1.size()) * p2.size();
    w.resize(n);
    vh1.resize(n);
    vh2.resize(n);
    for (int a = 0; a < p1.size(); ++a)
      for (int b = 0; b < p2.size(); ++b) {
        const Eigen::Index q = static_cast<Eigen::Index>(a) * p2.size() + b;
        const auto vh = hat_velocity(p1.points[a], p2.points[b]);
        w[q] = p1.weights[a] * p2.weights[b];
        vh1[q] = vh[0];
        vh2[q] = vh[1];
      }
  }
};

}  // namespace detail

/// rho = int f dv - rho_b, j_i = int vhat_i f dv on every (t,x) quadrature point of a slab.
inline SlabMoments compute_slab_moments(const PhaseSpace& V, const SlabFunction& f, const SpatialField& rho_b) {
  const int nqt = V.t_axis().qpoints(), nqx = V.x_axis().qpoints();
  const Eigen::Index nv = static_cast<Eigen::Index>(V.v1_axis().qpoints()) * V.v2_axis().qpoints();
  SlabMoments m{Eigen::VectorXd::Zero(nqt * nqx), Eigen::VectorXd::Zero(nqt * nqx), Eigen::VectorXd::Zero(nqt * nqx)};
  if (V.slab_size() > 0) {
    const detail::VelocityGrid vg(V);
    V.for_each_plane(f, false, [&](const PhasePlane& P) {
      for (int a = 0; a < nqt; ++a) {
        const auto fa = P.f.segment(a * nv, nv);
        const Eigen::Index q = static_cast<Eigen::Index>(a) * nqx + P.xq;
        m.rho[q] = vg.w.dot(fa);
        m.j1[q] = vg.w.cwiseProduct(vg.vh1).dot(fa);
        m.j2[q] = vg.w.cwiseProduct(vg.vh2).dot(fa);
      }
    });
  }
  for (int a = 0; a < nqt; ++a)
    for (int q = 0; q < nqx; ++q) m.rho[a * nqx + q] -= rho_b(V.x_axis().quad.points[q]);
  return m;
}

/// Moment tables for a whole history of slab functions.
inline SourceMoments compute_moments(const PhaseSpace& V, const std::vector<SlabFunction>& f, const SpatialField& rho_b) {
  SourceMoments s;
  s.rho_b = rho_b;
  s.slabs.reserve(f.size());
  for (const auto& fm : f) s.slabs.push_back(compute_slab_moments(V, fm, rho_b));
  return s;
}

/// Moments of a spatial trace (a time level) on the x quadrature points.
inline MomentSnapshot compute_moments_at(const PhaseSpace& V, const Eigen::VectorXd& trace, const SpatialField& rho_b) {
  const int nqx = V.x_axis().qpoints();
  MomentSnapshot s;
  s.x = V.x_axis().quad.points;
  s.density = s.rho = s.j1 = s.j2 = Eigen::VectorXd::Zero(nqx);
  if (V.trace_size() > 0) {
    const detail::VelocityGrid vg(V);
    V.for_each_spatial_plane(trace, [&](int qx, const Eigen::VectorXd& g) {
      s.density[qx] = vg.w.dot(g);
      s.j1[qx] = vg.w.cwiseProduct(vg.vh1).dot(g);
      s.j2[qx] = vg.w.cwiseProduct(vg.vh2).dot(g);
    });
  }
  for (int q = 0; q < nqx; ++q) s.rho[q] = s.density[q] - rho_b(s.x[q]);
  return s;
}

/// Snapshot of the moments of a slab function at time t inside its slab.
inline MomentSnapshot compute_moments(const PhaseSpace& V, const SlabFunction& f, double t, const SpatialField& rho_b) {
  const Interval I = V.time().slab(f.slab);
  if (!I.contains(t, 1e-12 * V.time().final_time())) throw DomainError("compute_moments: t outside slab");
  const auto tv = V.t_axis().basis.values(std::clamp((t - I.lo) / I.length(), 0.0, 1.0));
  Eigen::VectorXd tr = Eigen::VectorXd::Zero(V.trace_size());
  for (int a = 0; a < V.nt(); ++a) tr += tv[a] * f.coeffs.segment(static_cast<Eigen::Index>(a) * V.trace_size(), V.trace_size());
  return compute_moments_at(V, tr, rho_b);
}

/// Spatial marginal int f0 dv of a trace as a degree-k function on the x grid.
/// With this as rho_b the initial charge density vanishes identically.
inline SpatialField build_neutralizing_background(const PhaseSpace& V, const Eigen::VectorXd& f0_trace) {
  auto coeffs = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(V.nxd()));
  if (V.trace_size() > 0) {
    const Eigen::VectorXd i1 = V.v1_axis().test * Eigen::VectorXd::Ones(V.v1_axis().qpoints());
    const Eigen::VectorXd i2 = V.v2_axis().test * Eigen::VectorXd::Ones(V.v2_axis().qpoints());
    Eigen::VectorXd iv(V.v_size());
    for (int l1 = 0; l1 < V.nv1d(); ++l1) iv.segment(static_cast<Eigen::Index>(l1) * V.nv2d(), V.nv2d()) = i1[l1] * i2;
    for (int i = 0; i < V.nxd(); ++i) (*coeffs)[i] = f0_trace.segment(static_cast<Eigen::Index>(i) * V.v_size(), V.v_size()).dot(iv);
  }
  auto space = std::make_shared<ConformingSpace1D>(V.x_axis().space);
  return [coeffs, space](double x) {
    if (x < space->lo() || x > space->hi()) return 0.0;
    return coeffs->size() ? space->evaluate(*coeffs, x) : 0.0;
  };
}

/// x -> int_{x_min}^x rho(y) dy, exact for piecewise polynomials up to degree 15 on the grid.
class Antiderivative {
 public:
  Antiderivative(SpatialField rho, std::vector<double> nodes) : rho_(std::move(rho)), nodes_(std::move(nodes)), rule_(gauss_legendre(8)) {
    cumulative_.assign(nodes_.size(), 0.0);
    for (std::size_t c = 0; c + 1 < nodes_.size(); ++c) {
      cumulative_[c + 1] = cumulative_[c] + integrate(nodes_[c], nodes_[c + 1]);
      total_abs_ += std::abs(integrate(nodes_[c], nodes_[c + 1], true));
    }
  }

  double operator()(double x) const {
    if (x <= nodes_.front()) return 0.0;
    if (x >= nodes_.back()) return cumulative_.back();
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
    const std::size_t c = static_cast<std::size_t>(it - nodes_.begin()) - 1;
    return cumulative_[c] + integrate(nodes_[c], x);
  }

  double total() const { return cumulative_.back(); }
  double total_abs() const { return total_abs_; }

 private:
  double integrate(double a, double b, bool absolute = false) const {
    double s = 0.0;
    for (int q = 0; q < rule_.size(); ++q) {
      const double r = rho_(a + (b - a) * rule_.points[q]);
      s += rule_.weights[q] * (absolute ? std::abs(r) : r);
    }
    return s * (b - a);
  }

  SpatialField rho_;
  std::vector<double> nodes_;
  GaussRule rule_;
  std::vector<double> cumulative_;
  double total_abs_ = 0.0;
};

/// E1^0(x) = int_{x_min}^x rho(0,y) dy. Throws if the total charge is not zero.
inline Antiderivative initial_E1(const SpatialField& rho0, const std::vector<double>& x_nodes, double tol = 1e-10) {
  Antiderivative E(rho0, x_nodes);
  if (std::abs(E.total()) > tol * std::max(1.0, E.total_abs()))
  {
    std::ostringstream os;
    os << "initial charge density integrates to " << E.total() << ", not zero";
    throw NonNeutralError(os.str());
  }
  return E;
}

/// Initial E1 for a distribution trace and background: rho(0,x) = int f0 dv - rho_b.
inline Antiderivative initial_E1(const PhaseSpace& V, const Eigen::VectorXd& f0_trace, const SpatialField& rho_b, double tol = 1e-10) {
  const SpatialField marginal = build_neutralizing_background(V, f0_trace);
  return initial_E1([marginal, rho_b](double x) { return marginal(x) - rho_b(x); }, V.x_axis().space.nodes(), tol);
}

}  // namespace vmsd
