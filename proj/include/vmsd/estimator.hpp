#pragma once

// Residual-based a posteriori estimators and measured errors.
//
// Maxwell:  R1 = b - M1 W_t - M2 W_x on every slab,  R2|_{S_m} = [W]_{m-1} / h,
//           eta = ||h R1||_{L2(Q~_T)} + ||h R2||_{L2(Q~_T)}
// Vlasov:   R1 = f_t + G . grad f,                   R2|_{S_m} = [f]_{m-1} / h,
//           eta = ||h R1||_{L2(Q_T)} (2 + ||G||_inf) + ||h R2||_{L2(Q_T)}
// The unknown constants are 1. Jumps are taken at t_0 (against the projected
// initial data) and at every interior slab interface; R2 is constant in time
// on the slab after the interface, so ||h R2||^2_{S_m} = |I_m| ||[w]_{m-1}||^2.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "vmsd/coupling.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/maxwell.hpp"
#include "vmsd/riesz.hpp"
#include "vmsd/vlasov.hpp"

namespace vmsd {

/// Per-slab weighted residual norms ||h R1||_{L2(S_m)}, ||h R2||_{L2(S_m)}.
struct ResidualNorms {
  std::vector<double> hR1, hR2;
  double h = 0.0;

  static double l2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }
  double total_hR1() const { return l2(hR1); }
  double total_hR2() const { return l2(hR2); }
};

/// ||w||^2_{L2(Omega_x)} of a field trace (all components).
inline double trace_norm_squared(const FieldSpace& F, const Eigen::VectorXd& tr) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto seg = tr.segment(static_cast<Eigen::Index>(c) * F.nxd(), F.nxd());
    s += seg.dot(F.x_axis().mass * seg);
  }
  return s;
}

/// ||w||^2_{L2(Omega)} of a phase-space trace.
inline double trace_norm_squared(const PhaseSpace& V, const Eigen::VectorXd& tr) {
  if (V.trace_size() == 0) return 0.0;
  Dims d{V.nxd(), V.nv1d(), V.nv2d()};
  Eigen::VectorXd M = mode_product(tr, d, 0, V.x_axis().mass);
  M = mode_product(M, d, 1, V.v1_axis().mass);
  M = mode_product(M, d, 2, V.v2_axis().mass);
  return tr.dot(M);
}

/// Maxwell residuals of W against the sources b that produced it.
inline ResidualNorms residuals_maxwell(const MaxwellSolver& S, const FieldHistory& W, const SourceMoments& b) {
  const FieldSpace& F = S.space();
  ResidualNorms r;
  r.h = S.h();
  Eigen::VectorXd prev = W.initial;
  for (std::size_t k = 0; k < W.slabs.size(); ++k) {
    const SlabFunction& w = W.slabs[k];
    const int m = w.slab;
    const auto op = S.operators(m);
    const Eigen::VectorXd R1 = MaxwellSolver::source_rows(b.slabs.at(k)) - op.L * w.coeffs;
    r.hR1.push_back(r.h * std::sqrt(op.w4.dot(R1.cwiseAbs2())));
    const Eigen::VectorXd jump = F.trace(w, false) - prev;
    r.hR2.push_back(std::sqrt(F.time().length(m) * trace_norm_squared(F, jump)));
    prev = F.trace(w, true);
  }
  return r;
}

/// Vlasov residuals of f with the drift G that produced it.
inline ResidualNorms residuals_vlasov(const PhaseSpace& V, double h, const DistributionHistory& f, const DriftField& G) {
  ResidualNorms r;
  r.h = h;
  const int nqt = V.t_axis().qpoints(), nqx = V.x_axis().qpoints();
  const auto& q1 = V.v1_axis().quad;
  const auto& q2 = V.v2_axis().quad;
  const Eigen::Index nv = static_cast<Eigen::Index>(q1.size()) * q2.size();
  Eigen::VectorXd wv(nv), vh1(nv), vh2(nv);
  for (int a = 0; a < q1.size(); ++a)
    for (int c = 0; c < q2.size(); ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(a) * q2.size() + c;
      const auto vh = hat_velocity(q1.points[a], q2.points[c]);
      wv[i] = q1.weights[a] * q2.weights[c];
      vh1[i] = vh[0];
      vh2[i] = vh[1];
    }
  Eigen::VectorXd prev = f.initial;
  for (std::size_t k = 0; k < f.slabs.size(); ++k) {
    const SlabFunction& fm = f.slabs[k];
    const int m = fm.slab;
    const auto tw = V.t_axis().weights(V.time().slab(m));
    const auto& fld = G.slabs.at(k);
    double s = 0.0;
    if (V.slab_size() > 0) {
      V.for_each_plane(fm, true, [&](const PhasePlane& P) {
        const double wx = V.x_axis().quad.weights[P.xq];
        for (int a = 0; a < nqt; ++a) {
          const Eigen::Index qtx = static_cast<Eigen::Index>(a) * nqx + P.xq;
          const double E1 = fld[0][qtx], E2 = fld[1][qtx], B = fld[2][qtx];
          const auto seg = [&](const Eigen::VectorXd& v) { return v.segment(a * nv, nv); };
          const Eigen::ArrayXd R = seg(P.ft).array() + vh1.array() * seg(P.fx).array() +
                                   (E1 + vh2.array() * B) * seg(P.fv1).array() + (E2 - vh1.array() * B) * seg(P.fv2).array();
          s += tw[a] * wx * (wv.array() * R.square()).sum();
        }
      });
    }
    r.hR1.push_back(h * std::sqrt(s));
    const Eigen::VectorXd jump = V.trace(fm, false) - prev;
    r.hR2.push_back(std::sqrt(V.time().length(m) * trace_norm_squared(V, jump)));
    prev = V.trace(fm, true);
  }
  return r;
}

struct EstimatorReport {
  ResidualNorms maxwell, vlasov;
  double G_sup = 0.0;
  double eta_maxwell = 0.0;    // space-time field estimator
  double eta_maxwell_T = 0.0;  // same residual sum, final-time field estimator
  double eta_vlasov = 0.0;
};

inline double eta_maxwell(const ResidualNorms& r) { return r.total_hR1() + r.total_hR2(); }
inline double eta_vlasov(const ResidualNorms& r, double G_sup) { return r.total_hR1() * (2.0 + G_sup) + r.total_hR2(); }

inline EstimatorReport eta(const ResidualNorms& maxwell, const ResidualNorms& vlasov, double G_sup) {
  EstimatorReport e;
  e.maxwell = maxwell;
  e.vlasov = vlasov;
  e.G_sup = G_sup;
  e.eta_maxwell = eta_maxwell(maxwell);
  e.eta_maxwell_T = e.eta_maxwell;
  e.eta_vlasov = eta_vlasov(vlasov, G_sup);
  return e;
}

/// Both estimators for the final iterate of a run.
/// Without a field solve the field residuals are reported as zero.
inline EstimatorReport estimate(const Discretization& D, const IterationState& st) {
  ResidualNorms rm;
  if (st.fields_solved) {
    rm = residuals_maxwell(D.maxwell(), st.W, st.sources);
  } else {
    rm.h = D.mesh().field_h();
    rm.hR1.assign(st.W.slabs.size(), 0.0);
    rm.hR2.assign(st.W.slabs.size(), 0.0);
  }
  return eta(rm, residuals_vlasov(D.phase(), D.mesh().h(), st.f, st.drift), st.drift.sup_norm);
}

/// eta / err; nullopt when err == 0 (exact case when eta == 0 as well).
struct Effectivity {
  std::optional<double> value;
  bool exact = false;
};

inline Effectivity effectivity(double eta_value, double true_err) {
  if (true_err > 0.0) return {eta_value / true_err, false};
  return {std::nullopt, eta_value == 0.0};
}

// ---------------------------------------------------------------------------
// Measured errors against exact solutions.

/// ||f - f_h||_{L2(Q_T)} on the slab quadrature grids.
inline double l2_error(const PhaseSpace& V, const DistributionHistory& f, const PhaseSpace::Target& exact) {
  const auto& q1 = V.v1_axis().quad;
  const auto& q2 = V.v2_axis().quad;
  const int nqt = V.t_axis().qpoints();
  const Eigen::Index nv = static_cast<Eigen::Index>(q1.size()) * q2.size();
  double s = 0.0;
  for (const auto& fm : f.slabs) {
    const auto tp = V.t_axis().points(V.time().slab(fm.slab));
    const auto tw = V.t_axis().weights(V.time().slab(fm.slab));
    V.for_each_plane(fm, false, [&](const PhasePlane& P) {
      const double x = V.x_axis().quad.points[P.xq], wx = V.x_axis().quad.weights[P.xq];
      for (int a = 0; a < nqt; ++a)
        for (int i = 0; i < q1.size(); ++i)
          for (int j = 0; j < q2.size(); ++j) {
            const Eigen::Index k = a * nv + static_cast<Eigen::Index>(i) * q2.size() + j;
            const double e = exact(tp[a], x, q1.points[i], q2.points[j]) - P.f[k];
            s += tw[a] * wx * q1.weights[i] * q2.weights[j] * e * e;
          }
    });
  }
  return std::sqrt(s);
}

/// ||W - W_h||_{L2(Q~_T)}, all components.
inline double l2_error(const FieldSpace& F, const FieldHistory& W, const FieldSpace::Target& exact) {
  const int nqt = F.t_axis().qpoints(), nqx = F.x_axis().qpoints();
  double s = 0.0;
  for (const auto& wm : W.slabs) {
    const auto tp = F.t_axis().points(F.time().slab(wm.slab));
    const Eigen::VectorXd w = F.weights(wm.slab);
    std::array<Eigen::VectorXd, 3> vals{F.on_quadrature(wm, 0), F.on_quadrature(wm, 1), F.on_quadrature(wm, 2)};
    for (int a = 0; a < nqt; ++a)
      for (int q = 0; q < nqx; ++q) {
        const auto ex = exact(tp[a], F.x_axis().quad.points[q]);
        const Eigen::Index k = static_cast<Eigen::Index>(a) * nqx + q;
        for (int c = 0; c < 3; ++c) s += w[k] * std::pow(ex[c] - vals[c][k], 2);
      }
  }
  return std::sqrt(s);
}

/// ||W - W_h||_{H^{-1}(Q~_T)} with a (t,x) reference grid `factor` times finer.
inline double h_minus_one_error(const FieldSpace& F, const FieldHistory& W, const FieldSpace::Target& exact, int factor = 4) {
  const auto& xn = F.x_axis().space.nodes();
  const RieszNorm R = RieszNorm::refined({{0.0, F.time().final_time()}, {xn.front(), xn.back()}},
                                         {F.time().slabs(), F.x_axis().space.cells()}, factor);
  R.require_finer_than({F.time().slabs(), F.x_axis().space.cells()});
  const auto& xs = R.points(1);
  const SparseMatrix Ex = F.x_axis().space.eval_matrix(xs, 0);
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    s += std::pow(R.norm([&](int, double t, Eigen::Ref<Eigen::VectorXd> plane) {
                    const int m = F.time().slab_of(t);
                    const SlabFunction& wm = W.slabs.at(m - 1);
                    const Interval I = F.time().slab(m);
                    const auto tv = F.t_axis().basis.values((t - I.lo) / I.length());
                    Eigen::VectorXd tr = Eigen::VectorXd::Zero(F.nxd());
                    for (int a = 0; a < F.nt(); ++a) tr += tv[a] * wm.coeffs.segment(F.index(c, a, 0), F.nxd());
                    const Eigen::VectorXd fe = Ex * tr;
                    for (std::size_t j = 0; j < xs.size(); ++j) plane[j] = exact(t, xs[j])[c] - fe[j];
                  }),
                  2);
  }
  return std::sqrt(s);
}

/// ||f(T) - f_h(T)||_{H^{-1}(Omega)} with a reference grid `factor` times finer
/// in x, v1, v2. Uses two Gauss points per reference cell.
inline double h_minus_one_error_final(const PhaseSpace& V, const DistributionHistory& f, const PhaseSpace::SpatialTarget& exact_T,
                                      int factor = 4) {
  const auto& xn = V.x_axis().space.nodes();
  const auto& n1 = V.v1_axis().space.nodes();
  const auto& n2 = V.v2_axis().space.nodes();
  const std::vector<int> cells{V.x_axis().space.cells(), V.v1_axis().space.cells(), V.v2_axis().space.cells()};
  const RieszNorm R = RieszNorm::refined({{xn.front(), xn.back()}, {n1.front(), n1.back()}, {n2.front(), n2.back()}}, cells, factor, 2);
  R.require_finer_than(cells);
  const Eigen::VectorXd tr = f.slabs.empty() ? f.initial : V.trace(f.slabs.back(), true);
  const auto& p1 = R.points(1);
  const auto& p2 = R.points(2);
  const SparseMatrix E1 = V.v1_axis().space.eval_matrix(p1, 0);
  const SparseMatrix E2 = V.v2_axis().space.eval_matrix(p2, 0);
  const auto& sx = V.x_axis().space;
  const long vs = V.v_size();
  return R.norm([&](int, double x, Eigen::Ref<Eigen::VectorXd> plane) {
    // FE trace on the plane: contract x, then evaluate in v1, v2.
    Eigen::VectorXd S = Eigen::VectorXd::Zero(vs);
    const auto [cx, xi] = sx.locate(x);
    for (int j = 0; j < sx.shape().size(); ++j) {
      const int d = sx.dof_of(cx, j);
      if (d >= 0) S += sx.shape().value(j, xi) * tr.segment(static_cast<Eigen::Index>(d) * vs, vs);
    }
    Eigen::VectorXd g;
    if (vs > 0) {
      Dims dd{V.nv1d(), V.nv2d()};
      g = mode_product(S, dd, 0, E1);
      g = mode_product(g, dd, 1, E2);
    } else {
      g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p1.size()) * p2.size());
    }
    for (std::size_t a = 0; a < p1.size(); ++a)
      for (std::size_t b = 0; b < p2.size(); ++b) {
        const Eigen::Index k = static_cast<Eigen::Index>(a * p2.size() + b);
        plane[k] = exact_T(x, p1[a], p2[b]) - g[k];
      }
  });
}

}  // namespace vmsd
