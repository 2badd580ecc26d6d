#pragma once

// Finite-element spaces on the slab mesh.
//
//   FieldSpace : tilde V_h, three components (E1, E2, B) on I_m x tau_x
//   PhaseSpace : V_h, scalar on I_m x tau_x x tau_v1 x tau_v2
//
// Both are tensor products of a per-slab time basis (discontinuous across
// slab interfaces) with H^1_0-conforming Lagrange spaces in each spatial
// direction. Coefficients are stored row-major:
//   field: [component][time node][x dof]
//   phase: [time node][x dof][v1 dof][v2 dof]

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "vmsd/basis.hpp"
#include "vmsd/mesh.hpp"
#include "vmsd/quadrature.hpp"
#include "vmsd/tensor.hpp"

namespace vmsd {

using RowSparse = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One spatial direction: conforming space, its cell quadrature and the
/// matrices derived from them.
struct Axis {
  Axis(const std::vector<double>& nodes, int degree, const GaussRule& rule)
      : space(nodes, degree), quad(cell_quadrature(nodes, rule)) {
    E = space.eval_matrix(quad.points, 0);
    D = space.eval_matrix(quad.points, 1);
    E_rows = E;
    D_rows = D;
    mass = weighted_gram(E, quad.weights, E);
    Eigen::Map<const Eigen::VectorXd> w(quad.weights.data(), quad.size());
    test = SparseMatrix(E.transpose() * w.asDiagonal());
    if (space.dofs() > 0) {
      mass_solver = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(mass);
      if (mass_solver->info() != Eigen::Success) throw InvariantError("singular 1D mass matrix");
    }
  }

  int dofs() const { return space.dofs(); }
  int qpoints() const { return quad.size(); }

  ConformingSpace1D space;
  CellQuadrature quad;
  SparseMatrix E, D;         // quad points x dofs
  RowSparse E_rows, D_rows;  // same, row access
  SparseMatrix mass;
  SparseMatrix test;  // E^T diag(w): dofs x quad points
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> mass_solver;
};

/// Per-slab time basis with its Gauss rule, expressed on the reference slab [0,1].
struct TimeAxis {
  TimeAxis(int degree, const GaussRule& r) : basis(degree), rule(r) {
    E = basis.eval_matrix(rule.points, 1.0, 0);
    D_unit = basis.eval_matrix(rule.points, 1.0, 1);
    mass_unit = weighted_gram(E, rule.weights, E);
    solver_unit = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(mass_unit);
    start = basis.values(0.0);
    end = basis.values(1.0);
  }

  int size() const { return basis.size(); }
  int qpoints() const { return rule.size(); }

  /// Physical quadrature points of slab [t0, t1].
  std::vector<double> points(const Interval& slab) const {
    std::vector<double> p(rule.size());
    for (int q = 0; q < rule.size(); ++q) p[q] = slab.lo + slab.length() * rule.points[q];
    return p;
  }
  std::vector<double> weights(const Interval& slab) const {
    std::vector<double> w(rule.size());
    for (int q = 0; q < rule.size(); ++q) w[q] = slab.length() * rule.weights[q];
    return w;
  }
  SparseMatrix D(double len) const { return D_unit / len; }

  SlabTimeBasis basis;
  GaussRule rule;
  SparseMatrix E, D_unit, mass_unit;
  std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> solver_unit;
  std::vector<double> start, end;  // basis values at the slab ends
};

/// Coefficients of a function on one slab (or a spatial trace, slab = 0).
struct SlabFunction {
  int slab = 0;
  int components = 1;
  Eigen::VectorXd coeffs;
};

/// Field space tilde V_h: components x P_k(I_m) x P_k(tau_x), zero trace on dOmega_x.
class FieldSpace {
 public:
  using Target = std::function<std::array<double, 3>(double t, double x)>;
  using SpatialTarget = std::function<std::array<double, 3>(double x)>;

  FieldSpace(const SlabMesh& mesh, int degree)
      : time_(mesh.time()),
        degree_(degree),
        rule_(gauss_legendre(default_points_per_coordinate(degree))),
        t_(std::make_shared<TimeAxis>(degree, rule_)),
        x_(std::make_shared<Axis>(mesh.grid().x_nodes(), degree, rule_)) {}

  static constexpr int components() { return 3; }
  int degree() const { return degree_; }
  const TimePartition& time() const { return time_; }
  const TimeAxis& t_axis() const { return *t_; }
  const Axis& x_axis() const { return *x_; }
  int nt() const { return t_->size(); }
  int nxd() const { return x_->dofs(); }
  int component_size() const { return nt() * nxd(); }
  int slab_size() const { return components() * component_size(); }
  int trace_size() const { return components() * nxd(); }
  int index(int c, int a, int i) const { return (c * nt() + a) * nxd() + i; }

  SlabFunction zero(int slab) const { return {slab, 3, Eigen::VectorXd::Zero(slab_size())}; }

  /// L2 projection P_m onto the slab space.
  SlabFunction project(int slab, const Target& target) const {
    SlabFunction out = zero(slab);
    if (nxd() == 0) return out;
    const Interval I = time_.slab(slab);
    const auto tp = t_->points(I);
    const auto tw = t_->weights(I);
    const int nqt = t_->qpoints(), nqx = x_->qpoints();
    std::array<Eigen::VectorXd, 3> F;
    for (auto& f : F) f.resize(static_cast<Eigen::Index>(nqt) * nqx);
    for (int a = 0; a < nqt; ++a)
      for (int q = 0; q < nqx; ++q) {
        const auto v = target(tp[a], x_->quad.points[q]);
        for (int c = 0; c < 3; ++c) F[c][a * nqx + q] = v[c];
      }
    Eigen::Map<const Eigen::VectorXd> twv(tw.data(), nqt);
    const SparseMatrix Tt = SparseMatrix(t_->E.transpose() * twv.asDiagonal());
    const Eigen::SimplicialLDLT<SparseMatrix> Mt(SparseMatrix(t_->mass_unit * I.length()));
    for (int c = 0; c < 3; ++c) {
      Dims d{nqt, nqx};
      Eigen::VectorXd b = mode_product(F[c], d, 0, Tt);
      b = mode_product(b, d, 1, x_->test);
      b = mode_solve(b, d, 0, Mt);
      b = mode_solve(b, d, 1, *x_->mass_solver);
      out.coeffs.segment(static_cast<Eigen::Index>(c) * component_size(), component_size()) = b;
    }
    return out;
  }

  /// L2 projection of spatial data onto the x space (a trace: [component][x dof]).
  Eigen::VectorXd project_spatial(const SpatialTarget& target) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(trace_size());
    if (nxd() == 0) return out;
    const int nqx = x_->qpoints();
    for (int c = 0; c < 3; ++c) {
      Eigen::VectorXd F(nqx);
      for (int q = 0; q < nqx; ++q) F[q] = target(x_->quad.points[q])[c];
      out.segment(static_cast<Eigen::Index>(c) * nxd(), nxd()) = x_->mass_solver->solve(Eigen::VectorXd(x_->test * F));
    }
    return out;
  }

  /// Time trace at the slab start (w_+ at t_{m-1}) or end (w_- at t_m).
  Eigen::VectorXd trace(const SlabFunction& w, bool at_end) const {
    const auto& tv = at_end ? t_->end : t_->start;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(trace_size());
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < nt(); ++a)
        out.segment(static_cast<Eigen::Index>(c) * nxd(), nxd()) += tv[a] * w.coeffs.segment(index(c, a, 0), nxd());
    return out;
  }

  /// Point value of all components; t must lie in the closed slab interval.
  std::array<double, 3> evaluate(const SlabFunction& w, double t, double x, int dt = 0, int dx = 0) const {
    const Interval I = time_.slab(w.slab);
    if (!I.contains(t, 1e-12 * time_.final_time())) throw DomainError("evaluate: t outside slab");
    const double xi = std::clamp((t - I.lo) / I.length(), 0.0, 1.0);
    const auto tv = dt ? t_->basis.derivatives(xi, I.length()) : t_->basis.values(xi);
    std::array<double, 3> out{};
    for (int c = 0; c < 3; ++c)
      for (int a = 0; a < nt(); ++a)
        out[c] += tv[a] * x_->space.evaluate(w.coeffs.segment(index(c, a, 0), nxd()), x, dx);
    return out;
  }

  /// Values of one component on the slab's (t,x) quadrature grid, [qt][qx].
  /// dt/dx select derivatives.
  Eigen::VectorXd on_quadrature(const SlabFunction& w, int c, int dt = 0, int dx = 0) const {
    const double len = time_.length(w.slab);
    Dims d{nt(), nxd()};
    Eigen::VectorXd block = w.coeffs.segment(static_cast<Eigen::Index>(c) * component_size(), component_size());
    if (nxd() == 0) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t_->qpoints()) * x_->qpoints());
    Eigen::VectorXd v = dt ? mode_product(block, d, 0, t_->D(len)) : mode_product(block, d, 0, t_->E);
    return dx ? mode_product(v, d, 1, x_->D) : mode_product(v, d, 1, x_->E);
  }

  /// Quadrature weights of the (t,x) grid of a slab, [qt][qx].
  Eigen::VectorXd weights(int slab) const {
    const auto tw = t_->weights(time_.slab(slab));
    Eigen::VectorXd w(static_cast<Eigen::Index>(tw.size()) * x_->qpoints());
    for (std::size_t a = 0; a < tw.size(); ++a)
      for (int q = 0; q < x_->qpoints(); ++q) w[static_cast<Eigen::Index>(a) * x_->qpoints() + q] = tw[a] * x_->quad.weights[q];
    return w;
  }

 private:
  TimePartition time_;
  int degree_;
  GaussRule rule_;
  std::shared_ptr<TimeAxis> t_;
  std::shared_ptr<Axis> x_;
};

/// Values and first derivatives of a phase-space function on the tensor
/// quadrature grid (t, v1, v2) at one fixed x quadrature point, [qt][qv1][qv2].
struct PhasePlane {
  int xq = 0;
  Eigen::VectorXd f, ft, fx, fv1, fv2;
};

/// Phase-space V_h: P_k(I_m) x P_k(tau_x) x P_k(tau_v1) x P_k(tau_v2), zero trace on the boundary.
class PhaseSpace {
 public:
  using Target = std::function<double(double t, double x, double v1, double v2)>;
  using SpatialTarget = std::function<double(double x, double v1, double v2)>;

  PhaseSpace(const SlabMesh& mesh, int degree)
      : time_(mesh.time()),
        degree_(degree),
        rule_(gauss_legendre(default_points_per_coordinate(degree))),
        t_(std::make_shared<TimeAxis>(degree, rule_)),
        x_(std::make_shared<Axis>(mesh.grid().x_nodes(), degree, rule_)),
        v1_(std::make_shared<Axis>(mesh.grid().v1_nodes(), degree, rule_)),
        v2_(std::make_shared<Axis>(mesh.grid().v2_nodes(), degree, rule_)) {}

  int degree() const { return degree_; }
  const TimePartition& time() const { return time_; }
  const TimeAxis& t_axis() const { return *t_; }
  const Axis& x_axis() const { return *x_; }
  const Axis& v1_axis() const { return *v1_; }
  const Axis& v2_axis() const { return *v2_; }
  int nt() const { return t_->size(); }
  int nxd() const { return x_->dofs(); }
  int nv1d() const { return v1_->dofs(); }
  int nv2d() const { return v2_->dofs(); }
  int v_size() const { return nv1d() * nv2d(); }
  int tx_size() const { return nt() * nxd(); }
  int trace_size() const { return nxd() * v_size(); }
  int slab_size() const { return nt() * trace_size(); }
  long index(int a, int i, int l1, int l2) const {
    return ((static_cast<long>(a) * nxd() + i) * nv1d() + l1) * nv2d() + l2;
  }

  SlabFunction zero(int slab) const { return {slab, 1, Eigen::VectorXd::Zero(slab_size())}; }

  /// L2 projection P_m onto the slab space.
  SlabFunction project(int slab, const Target& target) const {
    SlabFunction out = zero(slab);
    if (slab_size() == 0) return out;
    const Interval I = time_.slab(slab);
    const auto tp = t_->points(I);
    const auto tw = t_->weights(I);
    const int nqt = t_->qpoints(), nqx = x_->qpoints(), nq1 = v1_->qpoints(), nq2 = v2_->qpoints();
    // Contract the x-direction plane by plane to keep memory at O(nqt * nq1 * nq2 * nxd).
    Eigen::VectorXd partial = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nqt) * nxd() * v_size());
    Eigen::VectorXd plane(static_cast<Eigen::Index>(nqt) * nq1 * nq2);
    for (int qx = 0; qx < nqx; ++qx) {
      const double x = x_->quad.points[qx];
      for (int a = 0; a < nqt; ++a)
        for (int q1 = 0; q1 < nq1; ++q1)
          for (int q2 = 0; q2 < nq2; ++q2)
            plane[(static_cast<Eigen::Index>(a) * nq1 + q1) * nq2 + q2] =
                tw[a] * target(tp[a], x, v1_->quad.points[q1], v2_->quad.points[q2]);
      Dims d{nqt, nq1, nq2};
      Eigen::VectorXd pv = mode_product(plane, d, 1, v1_->test);
      pv = mode_product(pv, d, 2, v2_->test);
      for (RowSparse::InnerIterator it(x_->E_rows, qx); it; ++it) {
        const double wx = it.value() * x_->quad.weights[qx];
        for (int a = 0; a < nqt; ++a)
          partial.segment((static_cast<Eigen::Index>(a) * nxd() + it.col()) * v_size(), v_size()) +=
              wx * pv.segment(static_cast<Eigen::Index>(a) * v_size(), v_size());
      }
    }
    Dims d{nqt, nxd(), nv1d(), nv2d()};
    Eigen::VectorXd b = mode_product(partial, d, 0, SparseMatrix(t_->E.transpose()));
    const Eigen::SimplicialLDLT<SparseMatrix> Mt(SparseMatrix(t_->mass_unit * I.length()));
    b = mode_solve(b, d, 0, Mt);
    out.coeffs = solve_spatial_mass(b, d);
    return out;
  }

  /// L2 projection of spatial data onto V_h restricted to one time level, [x][v1][v2].
  Eigen::VectorXd project_spatial(const SpatialTarget& target) const {
    if (trace_size() == 0) return Eigen::VectorXd::Zero(0);
    const int nqx = x_->qpoints(), nq1 = v1_->qpoints(), nq2 = v2_->qpoints();
    Eigen::VectorXd partial = Eigen::VectorXd::Zero(trace_size());
    Eigen::VectorXd plane(static_cast<Eigen::Index>(nq1) * nq2);
    for (int qx = 0; qx < nqx; ++qx) {
      const double x = x_->quad.points[qx];
      for (int q1 = 0; q1 < nq1; ++q1)
        for (int q2 = 0; q2 < nq2; ++q2) plane[static_cast<Eigen::Index>(q1) * nq2 + q2] = target(x, v1_->quad.points[q1], v2_->quad.points[q2]);
      Dims d{nq1, nq2};
      Eigen::VectorXd pv = mode_product(plane, d, 0, v1_->test);
      pv = mode_product(pv, d, 1, v2_->test);
      for (RowSparse::InnerIterator it(x_->E_rows, qx); it; ++it)
        partial.segment(static_cast<Eigen::Index>(it.col()) * v_size(), v_size()) += it.value() * x_->quad.weights[qx] * pv;
    }
    Dims d{1, nxd(), nv1d(), nv2d()};
    return solve_spatial_mass(partial, d);
  }

  /// Time trace at the slab start (w_+) or end (w_-).
  Eigen::VectorXd trace(const SlabFunction& w, bool at_end) const {
    const auto& tv = at_end ? t_->end : t_->start;
    Eigen::VectorXd out = Eigen::VectorXd::Zero(trace_size());
    for (int a = 0; a < nt(); ++a) out += tv[a] * w.coeffs.segment(static_cast<Eigen::Index>(a) * trace_size(), trace_size());
    return out;
  }

  /// Time-constant slab function with the given spatial trace.
  SlabFunction constant_in_time(int slab, const Eigen::VectorXd& spatial) const {
    SlabFunction out = zero(slab);
    for (int a = 0; a < nt(); ++a) out.coeffs.segment(static_cast<Eigen::Index>(a) * trace_size(), trace_size()) = spatial;
    return out;
  }

  double evaluate(const SlabFunction& w, double t, double x, double v1, double v2) const {
    const Interval I = time_.slab(w.slab);
    if (!I.contains(t, 1e-12 * time_.final_time())) throw DomainError("evaluate: t outside slab");
    const double xi = std::clamp((t - I.lo) / I.length(), 0.0, 1.0);
    const auto tv = t_->basis.values(xi);
    Eigen::VectorXd tr = Eigen::VectorXd::Zero(trace_size());
    for (int a = 0; a < nt(); ++a) tr += tv[a] * w.coeffs.segment(static_cast<Eigen::Index>(a) * trace_size(), trace_size());
    return evaluate_spatial(tr, x, v1, v2);
  }

  /// Point value of a spatial trace [x][v1][v2].
  double evaluate_spatial(const Eigen::VectorXd& tr, double x, double v1, double v2) const {
    const auto [cx, xx] = x_->space.locate(x);
    const auto [c1, x1] = v1_->space.locate(v1);
    const auto [c2, x2] = v2_->space.locate(v2);
    const auto& sx = x_->space;
    const auto& s1 = v1_->space;
    const auto& s2 = v2_->space;
    double val = 0.0;
    for (int i = 0; i < sx.shape().size(); ++i) {
      const int di = sx.dof_of(cx, i);
      if (di < 0) continue;
      const double bi = sx.shape().value(i, xx);
      for (int j = 0; j < s1.shape().size(); ++j) {
        const int dj = s1.dof_of(c1, j);
        if (dj < 0) continue;
        const double bj = s1.shape().value(j, x1);
        for (int l = 0; l < s2.shape().size(); ++l) {
          const int dl = s2.dof_of(c2, l);
          if (dl < 0) continue;
          val += tr[(static_cast<long>(di) * nv1d() + dj) * nv2d() + dl] * bi * bj * s2.shape().value(l, x2);
        }
      }
    }
    return val;
  }

  /// Sum-factorised evaluation on the slab quadrature grid, one x quadrature
  /// point at a time. `derivs` requests ft, fx, fv1, fv2 in addition to f.
  template <class Visitor>
  void for_each_plane(const SlabFunction& w, bool derivs, Visitor&& visit) const {
    const double len = time_.length(w.slab);
    const int nqx = x_->qpoints();
    const long vs = v_size();
    PhasePlane P;
    Eigen::VectorXd S(static_cast<Eigen::Index>(nt()) * vs), Sx(static_cast<Eigen::Index>(nt()) * vs);
    const SparseMatrix Dt = t_->D(len);
    for (int qx = 0; qx < nqx; ++qx) {
      S.setZero();
      Sx.setZero();
      for (RowSparse::InnerIterator it(x_->E_rows, qx); it; ++it)
        for (int a = 0; a < nt(); ++a)
          S.segment(static_cast<Eigen::Index>(a) * vs, vs) += it.value() * w.coeffs.segment(index(a, static_cast<int>(it.col()), 0, 0), vs);
      if (derivs)
        for (RowSparse::InnerIterator it(x_->D_rows, qx); it; ++it)
          for (int a = 0; a < nt(); ++a)
            Sx.segment(static_cast<Eigen::Index>(a) * vs, vs) += it.value() * w.coeffs.segment(index(a, static_cast<int>(it.col()), 0, 0), vs);
      P.xq = qx;
      P.f = grid(S, t_->E, v1_->E, v2_->E);
      if (derivs) {
        P.ft = grid(S, Dt, v1_->E, v2_->E);
        P.fx = grid(Sx, t_->E, v1_->E, v2_->E);
        P.fv1 = grid(S, t_->E, v1_->D, v2_->E);
        P.fv2 = grid(S, t_->E, v1_->E, v2_->D);
      }
      visit(static_cast<const PhasePlane&>(P));
    }
  }

  /// Spatial analogue of for_each_plane for a trace: values on the (v1,v2)
  /// quadrature grid at each x quadrature point.
  template <class Visitor>
  void for_each_spatial_plane(const Eigen::VectorXd& tr, Visitor&& visit) const {
    const int nqx = x_->qpoints();
    const long vs = v_size();
    Eigen::VectorXd S(vs);
    for (int qx = 0; qx < nqx; ++qx) {
      S.setZero();
      for (RowSparse::InnerIterator it(x_->E_rows, qx); it; ++it) S += it.value() * tr.segment(static_cast<Eigen::Index>(it.col()) * vs, vs);
      Dims d{nv1d(), nv2d()};
      Eigen::VectorXd g = mode_product(S, d, 0, v1_->E);
      g = mode_product(g, d, 1, v2_->E);
      visit(qx, static_cast<const Eigen::VectorXd&>(g));
    }
  }

  /// Weight of the (v1,v2) quadrature grid point, [q1][q2] flattened.
  double v_weight(int q1, int q2) const { return v1_->quad.weights[q1] * v2_->quad.weights[q2]; }

 private:
  Eigen::VectorXd grid(const Eigen::VectorXd& S, const SparseMatrix& Et, const SparseMatrix& E1, const SparseMatrix& E2) const {
    Dims d{nt(), nv1d(), nv2d()};
    Eigen::VectorXd g = mode_product(S, d, 0, Et);
    g = mode_product(g, d, 1, E1);
    return mode_product(g, d, 2, E2);
  }

  Eigen::VectorXd solve_spatial_mass(Eigen::VectorXd b, const Dims& d) const {
    b = mode_solve(b, d, 1, *x_->mass_solver);
    b = mode_solve(b, d, 2, *v1_->mass_solver);
    return mode_solve(b, d, 3, *v2_->mass_solver);
  }

  TimePartition time_;
  int degree_;
  GaussRule rule_;
  std::shared_ptr<TimeAxis> t_;
  std::shared_ptr<Axis> x_, v1_, v2_;
};

/// Time-average projection pi_m: replaces the slab function by its mean over
/// I_m (divided by |I_m|), which is again in the slab space.
inline SlabFunction project_pi(const SlabFunction& w, const TimeAxis& t, int block_size) {
  // Integral of each time basis function over the reference slab.
  std::vector<double> avg(t.size(), 0.0);
  for (int a = 0; a < t.size(); ++a)
    for (int q = 0; q < t.qpoints(); ++q) avg[a] += t.rule.weights[q] * t.basis.shape().value(a, t.rule.points[q]);
  SlabFunction out = w;
  const int comps = static_cast<int>(w.coeffs.size() / (static_cast<long>(t.size()) * block_size));
  for (int c = 0; c < comps; ++c) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(block_size);
    for (int a = 0; a < t.size(); ++a)
      mean += avg[a] * w.coeffs.segment((static_cast<Eigen::Index>(c) * t.size() + a) * block_size, block_size);
    for (int a = 0; a < t.size(); ++a)
      out.coeffs.segment((static_cast<Eigen::Index>(c) * t.size() + a) * block_size, block_size) = mean;
  }
  return out;
}

inline SlabFunction project_pi(const FieldSpace& V, const SlabFunction& w) { return project_pi(w, V.t_axis(), V.nxd()); }
inline SlabFunction project_pi(const PhaseSpace& V, const SlabFunction& w) { return project_pi(w, V.t_axis(), V.trace_size()); }

}  // namespace vmsd
