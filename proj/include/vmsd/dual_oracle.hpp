#pragma once

// Closed-form and characteristic solutions of the backward dual problems.
//
// Field dual:  -M1^T phi^_t - M2^T phi^_x = chi,  phi(T) = 0, phi^ = (phi1, phi1, phi2, phi3):
//   -phi1_t - phi1_x = chi1,  -phi2_t - phi3_x = chi2,  -phi3_t - phi2_x = chi3,
// solved by d'Alembert line integrals with chi extended by zero outside Omega_x.
//
// Distribution dual:  -Psi_t - G . grad Psi = 0,  Psi(T) = chi, i.e. Psi is
// constant along the characteristics dX/ds = Vhat1, dV/ds = E + B M Vhat.

#include <Eigen/Dense>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>
#include <cmath>
#include <functional>
#include <vector>

#include "vmsd/errors.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/maxwell.hpp"
#include "vmsd/mesh.hpp"
#include "vmsd/moments.hpp"
#include "vmsd/quadrature.hpp"

namespace vmsd {

// ---------------------------------------------------------------------------
// Field dual

using FieldDatum = std::function<std::array<double, 3>(double t, double x)>;

struct MaxwellDualData {
  FieldDatum chi;
  FieldDatum chi_x;  // optional d/dx chi; central differences when empty
  double T = 1.0;
  Interval omega{0.0, 1.0};
  bool flip_phi2 = false;  // test-only mutation: wrong sign on the backward half of phi2
};

namespace detail {

/// int_a^b g(s) ds by adaptive Gauss-Kronrod, split at the given break points.
inline double line_integral(const std::function<double(double)>& g, double a, double b, std::vector<double> breaks, double tol) {
  if (!(b > a)) return 0.0;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]), hi = std::min(b, breaks[i + 1]);
    if (hi > lo) s += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, lo, hi, 10, tol);
  }
  return s;
}

inline std::array<double, 3> chi_x_of(const MaxwellDualData& d, double t, double x) {
  if (d.chi_x) return d.chi_x(t, x);
  const double e = 1e-6 * std::max(1.0, d.omega.length());
  const auto p = d.chi(t, x + e), m = d.chi(t, x - e);
  return {(p[0] - m[0]) / (2 * e), (p[1] - m[1]) / (2 * e), (p[2] - m[2]) / (2 * e)};
}

/// Zero extension of chi (or chi_x) outside Omega_x.
inline std::array<double, 3> extended(const MaxwellDualData& d, double t, double x, bool derivative) {
  if (x < d.omega.lo || x > d.omega.hi) return {0.0, 0.0, 0.0};
  return derivative ? chi_x_of(d, t, x) : d.chi(t, x);
}

/// The three d'Alembert integrals of a datum (chi, or chi_x for the x-derivative of phi).
inline std::array<double, 3> dalembert(const MaxwellDualData& d, double t, double x, bool derivative, double tol) {
  // Forward characteristic y = x + s - t, backward y = x + t - s; both leave
  // Omega_x at s values where y hits an end point.
  const std::vector<double> fwd{t + d.omega.lo - x, t + d.omega.hi - x};
  const std::vector<double> bwd{t + x - d.omega.lo, t + x - d.omega.hi};
  std::vector<double> both = fwd;
  both.insert(both.end(), bwd.begin(), bwd.end());
  auto comp = [&](double s, bool forward, int c) { return extended(d, s, forward ? x + s - t : x + t - s, derivative)[c]; };
  const double phi1 = line_integral([&](double s) { return comp(s, true, 0); }, t, d.T, fwd, tol);
  const double u = line_integral([&](double s) { return comp(s, true, 1) + comp(s, true, 2); }, t, d.T, fwd, tol);
  const double w = line_integral([&](double s) { return comp(s, false, 1) - comp(s, false, 2); }, t, d.T, bwd, tol);
  const double phi2 = 0.5 * (u + (d.flip_phi2 ? -w : w));
  const double phi3 = 0.5 * (u - w);
  return {phi1, phi2, phi3};
}

}  // namespace detail

/// (phi1, phi2, phi3)(t, x).
inline std::array<double, 3> dual_maxwell_dalembert(const MaxwellDualData& d, double t, double x, double tol = 1e-10) {
  return detail::dalembert(d, t, x, false, tol);
}

/// d/dx (phi1, phi2, phi3)(t, x), by differentiating under the integral.
inline std::array<double, 3> dual_maxwell_dalembert_dx(const MaxwellDualData& d, double t, double x, double tol = 1e-10) {
  return detail::dalembert(d, t, x, true, tol);
}

/// Pointwise defect of the dual equation by central differences in t and x.
inline std::array<double, 3> dual_maxwell_fd_residual(const MaxwellDualData& d, double t, double x, double eps = 1e-4) {
  const auto tp = dual_maxwell_dalembert(d, t + eps, x), tm = dual_maxwell_dalembert(d, t - eps, x);
  const auto xp = dual_maxwell_dalembert(d, t, x + eps), xm = dual_maxwell_dalembert(d, t, x - eps);
  std::array<double, 3> pt{}, px{};
  for (int c = 0; c < 3; ++c) {
    pt[c] = (tp[c] - tm[c]) / (2 * eps);
    px[c] = (xp[c] - xm[c]) / (2 * eps);
  }
  const auto chi = detail::extended(d, t, x, false);
  return {-pt[0] - px[0] - chi[0], -pt[1] - px[2] - chi[1], -pt[2] - px[1] - chi[2]};
}

/// Norms entering the dual stability bounds, all over Q~_T = (0,T) x Omega_x.
struct DualStabilityReport {
  double phi1 = 0, chi1 = 0, phi1_x = 0, chi1_x = 0;
  double phi23 = 0, chi23 = 0;        // ||phi2|| + ||phi3||,  ||chi2|| + ||chi3||
  double phi23_x = 0, chi23_x = 0;    // sqrt(||phi2_x||^2 + ||phi3_x||^2), same for chi
  double phi_H1 = 0, chi_H1 = 0;
  double T = 0;
  double c_l2 = 0;  // sqrt(T) e^{T/2}
  double c_h1 = 0;  // sqrt(T) e^{T/2} + 2T + 1

  bool dx_bound_ok(double tol) const { return phi1_x <= T * chi1_x + tol && phi23_x <= T * chi23_x + tol; }
  bool l2_bound_ok(double tol) const { return phi1 <= c_l2 * chi1 + tol && phi23 <= c_l2 * chi23 + tol; }
  bool h1_bound_ok(double tol) const { return phi_H1 <= c_h1 * chi_H1 + tol; }
  bool ok(double tol = 1e-8) const { return dx_bound_ok(tol) && l2_bound_ok(tol) && h1_bound_ok(tol); }
};

/// Evaluates the stability norms with an nt x nx cell Gauss grid (3 points per cell);
/// line integrals to relative accuracy `tol`.
inline DualStabilityReport dual_stability_check(const MaxwellDualData& d, int nt = 8, int nx = 16, double tol = 1e-8) {
  const GaussRule g = gauss_legendre(3);
  const auto tq = cell_quadrature(detail::uniform_nodes(0.0, d.T, nt), g);
  const auto xq = cell_quadrature(detail::uniform_nodes(d.omega.lo, d.omega.hi, nx), g);
  std::array<double, 3> P{}, C{}, Px{}, Cx{}, Pt{}, Ct{};
  for (int a = 0; a < tq.size(); ++a)
    for (int b = 0; b < xq.size(); ++b) {
      const double t = tq.points[a], x = xq.points[b], w = tq.weights[a] * xq.weights[b];
      const auto phi = dual_maxwell_dalembert(d, t, x, tol);
      const auto phx = dual_maxwell_dalembert_dx(d, t, x, tol);
      const auto chi = d.chi(t, x);
      const auto chx = detail::chi_x_of(d, t, x);
      const double e = 1e-6 * std::max(1.0, d.T);
      const auto cp = d.chi(std::min(d.T, t + e), x), cm = d.chi(std::max(0.0, t - e), x);
      const double dt = std::min(d.T, t + e) - std::max(0.0, t - e);
      // phi_t from the dual equation itself: phi1_t = -chi1 - phi1_x, phi2_t = -chi2 - phi3_x, phi3_t = -chi3 - phi2_x.
      const std::array<double, 3> pht{-chi[0] - phx[0], -chi[1] - phx[2], -chi[2] - phx[1]};
      for (int c = 0; c < 3; ++c) {
        P[c] += w * phi[c] * phi[c];
        C[c] += w * chi[c] * chi[c];
        Px[c] += w * phx[c] * phx[c];
        Cx[c] += w * chx[c] * chx[c];
        Pt[c] += w * pht[c] * pht[c];
        const double cht = (cp[c] - cm[c]) / dt;
        Ct[c] += w * cht * cht;
      }
    }
  DualStabilityReport r;
  r.T = d.T;
  r.c_l2 = std::sqrt(d.T) * std::exp(0.5 * d.T);
  r.c_h1 = r.c_l2 + 2 * d.T + 1;
  r.phi1 = std::sqrt(P[0]);
  r.chi1 = std::sqrt(C[0]);
  r.phi1_x = std::sqrt(Px[0]);
  r.chi1_x = std::sqrt(Cx[0]);
  r.phi23 = std::sqrt(P[1]) + std::sqrt(P[2]);
  r.chi23 = std::sqrt(C[1]) + std::sqrt(C[2]);
  r.phi23_x = std::sqrt(Px[1] + Px[2]);
  r.chi23_x = std::sqrt(Cx[1] + Cx[2]);
  double ph = 0, ch = 0;
  for (int c = 0; c < 3; ++c) {
    ph += P[c] + Px[c] + Pt[c];
    ch += C[c] + Cx[c] + Ct[c];
  }
  r.phi_H1 = std::sqrt(ph);
  r.chi_H1 = std::sqrt(ch);
  return r;
}

// ---------------------------------------------------------------------------
// Characteristics

/// Field values (E1, E2, B) and their x-derivatives at (s, x); `slab` selects
/// the polynomial piece when s sits on a slab interface.
struct FieldSample {
  double E1 = 0, E2 = 0, B = 0, E1x = 0, E2x = 0, Bx = 0;
};

/// Time-piecewise field description used by the characteristic tracer.
struct FieldSampler {
  std::vector<double> breaks;  // 0 = t_0 < ... < t_M = T
  Interval omega{0.0, 1.0};
  std::function<FieldSample(double s, double x, int slab)> eval;
  /// Per slab: sup |d_x E1|, sup |d_x E2|, sup |d_x B|, sup |B|.
  std::vector<std::array<double, 4>> sups;

  int slabs() const { return static_cast<int>(breaks.size()) - 1; }
};

/// Fields from a discrete history. Outside Omega_x the fields are zero
/// (zero trace). Sup norms are sampled on a grid that contains all element
/// vertices, which is exact for k = 1.
inline FieldSampler sample_fields(const FieldSpace& F, const FieldHistory& W) {
  FieldSampler S;
  S.breaks = F.time().breakpoints();
  const auto& xn = F.x_axis().space.nodes();
  S.omega = {xn.front(), xn.back()};
  const FieldSpace* Fp = &F;
  const FieldHistory* Wp = &W;
  S.eval = [Fp, Wp, omega = S.omega](double s, double x, int slab) {
    FieldSample f;
    if (x < omega.lo || x > omega.hi) return f;
    const SlabFunction& w = Wp->slabs.at(slab - 1);
    const auto v = Fp->evaluate(w, s, x);
    const auto d = Fp->evaluate(w, s, x, 0, 1);
    return FieldSample{v[0], v[1], v[2], d[0], d[1], d[2]};
  };
  const int per = 2 * F.degree() + 3;
  for (int m = 1; m <= S.slabs(); ++m) {
    std::array<double, 4> sup{};
    const Interval I = F.time().slab(m);
    for (int a = 0; a < per; ++a) {
      const double t = I.lo + I.length() * a / (per - 1);
      for (std::size_t c = 0; c + 1 < xn.size(); ++c)
        for (int b = 0; b < per; ++b) {
          // Sample each cell from the inside so one-sided x-derivatives are seen on both sides of a node.
          const double x = xn[c] + (xn[c + 1] - xn[c]) * (b == 0 ? 1e-9 : b == per - 1 ? 1 - 1e-9 : double(b) / (per - 1));
          const FieldSample f = S.eval(t, x, m);
          sup = {std::max(sup[0], std::abs(f.E1x)), std::max(sup[1], std::abs(f.E2x)), std::max(sup[2], std::abs(f.Bx)),
                 std::max(sup[3], std::abs(f.B))};
        }
    }
    S.sups.push_back(sup);
  }
  return S;
}

/// Analytic fields, on a uniform time partition with `slabs` pieces.
/// Sup norms are sampled on a 201 x 201 grid per slab.
inline FieldSampler analytic_fields(std::function<FieldSample(double s, double x)> f, double T, int slabs, Interval omega) {
  FieldSampler S;
  S.breaks = detail::uniform_nodes(0.0, T, slabs);
  S.omega = omega;
  S.eval = [f](double s, double x, int) { return f(s, x); };
  for (int m = 1; m <= slabs; ++m) {
    std::array<double, 4> sup{};
    for (int a = 0; a <= 200; ++a)
      for (int b = 0; b <= 200; ++b) {
        const double t = S.breaks[m - 1] + (S.breaks[m] - S.breaks[m - 1]) * a / 200.0;
        const FieldSample v = f(t, omega.lo + omega.length() * b / 200.0);
        sup = {std::max(sup[0], std::abs(v.E1x)), std::max(sup[1], std::abs(v.E2x)), std::max(sup[2], std::abs(v.Bx)),
               std::max(sup[3], std::abs(v.B))};
      }
    S.sups.push_back(sup);
  }
  return S;
}

/// One observed point of a characteristic: position, velocity and the
/// sensitivity matrix J = d(X,V1,V2)/d(x,v1,v2) (row-major).
struct PathPoint {
  double s = 0;
  std::array<double, 3> z{};
  std::array<double, 9> J{};
};

struct CharacteristicPath {
  double t0 = 0, t1 = 0;
  std::vector<PathPoint> points;  // includes the seed and the end
  bool exited = false;            // X left Omega_x at some point

  const PathPoint& end() const { return points.back(); }
};

namespace detail {

using OdeState = std::vector<double>;

/// Right-hand side of the characteristic system for `copies` trajectories
/// stored back to back (3 entries each), optionally followed by the 3x3
/// sensitivity of the first trajectory.
struct CharacteristicRhs {
  const FieldSampler* S;
  int slab;
  int copies;
  bool sensitivities;
  bool* exited;

  void operator()(const OdeState& y, OdeState& dy, double s) const {
    for (int c = 0; c < copies; ++c) {
      const double X = y[3 * c], V1 = y[3 * c + 1], V2 = y[3 * c + 2];
      if (X < S->omega.lo || X > S->omega.hi) *exited = true;
      const FieldSample f = S->eval(s, X, slab);
      const auto vh = hat_velocity(V1, V2);
      dy[3 * c] = vh[0];
      dy[3 * c + 1] = f.E1 + f.B * vh[1];
      dy[3 * c + 2] = f.E2 - f.B * vh[0];
      if (c == 0 && sensitivities) {
        const auto Jv = hat_velocity_jacobian(V1, V2);
        // DF = d(rhs)/d(X, V1, V2).
        const double DF[3][3] = {{0.0, Jv[0][0], Jv[0][1]},
                                 {f.E1x + f.Bx * vh[1], f.B * Jv[1][0], f.B * Jv[1][1]},
                                 {f.E2x - f.Bx * vh[0], -f.B * Jv[0][0], -f.B * Jv[0][1]}};
        const int o = 3 * copies;
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += DF[i][k] * y[o + 3 * k + j];
            dy[o + 3 * i + j] = acc;
          }
      }
    }
  }
};

/// Integrates from t0 to t1 slab by slab; the observer sees every accepted step.
inline void integrate_slabwise(const FieldSampler& S, OdeState& y, double t0, double t1, int copies, bool sens, bool& exited,
                               const std::function<void(const OdeState&, double)>& observe, double tol) {
  namespace ode = boost::numeric::odeint;
  auto stepper = ode::make_controlled(tol, tol, ode::runge_kutta_dopri5<OdeState>());
  observe(y, t0);
  if (!(t1 > t0)) return;
  for (int m = 1; m <= S.slabs(); ++m) {
    const double a = std::max(t0, S.breaks[m - 1]), b = std::min(t1, S.breaks[m]);
    if (!(b > a)) continue;
    CharacteristicRhs rhs{&S, m, copies, sens, &exited};
    bool first = true;
    ode::integrate_adaptive(stepper, rhs, y, a, b, std::min(1e-2, b - a), [&](const OdeState& st, double s) {
      if (first) {  // the start point was already observed
        first = false;
        return;
      }
      observe(st, s);
    });
  }
}

}  // namespace detail

/// Traces the characteristic through (t0, x, v) forward to t1 with its
/// sensitivity matrix (identity at the seed).
inline CharacteristicPath integrate_characteristics(const FieldSampler& S, double t0, double t1, double x, double v1, double v2,
                                                    double tol = 1e-10) {
  CharacteristicPath p;
  p.t0 = t0;
  p.t1 = t1;
  detail::OdeState y{x, v1, v2, 1, 0, 0, 0, 1, 0, 0, 0, 1};
  detail::integrate_slabwise(
      S, y, t0, t1, 1, true, p.exited,
      [&](const detail::OdeState& st, double s) {
        PathPoint q;
        q.s = s;
        std::copy(st.begin(), st.begin() + 3, q.z.begin());
        std::copy(st.begin() + 3, st.begin() + 12, q.J.begin());
        p.points.push_back(q);
      },
      tol);
  return p;
}

/// Sensitivity matrix at t1 next to its central finite-difference estimate;
/// base and perturbed seeds are integrated as one system so they share steps.
struct SensitivityCheck {
  std::array<double, 9> J{}, J_fd{};
  double max_relative_mismatch() const {
    double scale = 0.0, diff = 0.0;
    for (int i = 0; i < 9; ++i) {
      scale = std::max(scale, std::abs(J[i]));
      diff = std::max(diff, std::abs(J[i] - J_fd[i]));
    }
    return diff / std::max(scale, 1e-300);
  }
};

inline SensitivityCheck sensitivity_vs_finite_difference(const FieldSampler& S, double t0, double t1, double x, double v1, double v2,
                                                         double eps = 1e-5, double tol = 1e-10) {
  const std::array<double, 3> z0{x, v1, v2};
  detail::OdeState y(3 * 7 + 9, 0.0);
  for (int c = 0; c < 7; ++c)
    for (int i = 0; i < 3; ++i) y[3 * c + i] = z0[i];
  for (int j = 0; j < 3; ++j) {
    y[3 * (1 + 2 * j) + j] += eps;
    y[3 * (2 + 2 * j) + j] -= eps;
  }
  y[21] = y[25] = y[29] = 1.0;
  bool exited = false;
  detail::integrate_slabwise(S, y, t0, t1, 7, true, exited, [](const detail::OdeState&, double) {}, tol);
  SensitivityCheck r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      r.J[3 * i + j] = y[21 + 3 * i + j];
      r.J_fd[3 * i + j] = (y[3 * (1 + 2 * j) + i] - y[3 * (2 + 2 * j) + i]) / (2 * eps);
    }
  return r;
}

/// Envelope check along a path: for every observed s,
///   |dX/dx| + |dV1/dx| + |dV2/dx|   <= exp(int_{t0}^s 2 + 2||d_x W||_inf + 3||B||_inf)
///   |dX/dv_j| + |dV1/dv_j| + |dV2/dv_j| <= exp(int_{t0}^s 2 + 3||B||_inf)
/// with per-slab sup norms and ||d_x W||_inf the sum of the three component sups.
struct GronwallCertificate {
  bool ok = true;
  double margin_x = 0.0;  // min over s of envelope - left side
  double margin_v = 0.0;  // min over s and j
};

inline GronwallCertificate gronwall_certificate(const CharacteristicPath& path, const FieldSampler& S) {
  GronwallCertificate c;
  c.margin_x = c.margin_v = std::numeric_limits<double>::infinity();
  auto exponent = [&](double s, bool with_dx) {
    double e = 0.0;
    for (int m = 1; m <= S.slabs(); ++m) {
      const double a = std::max(path.t0, S.breaks[m - 1]), b = std::min(s, S.breaks[m]);
      if (!(b > a)) continue;
      const auto& u = S.sups[m - 1];
      e += (2.0 + (with_dx ? 2.0 * (u[0] + u[1] + u[2]) : 0.0) + 3.0 * u[3]) * (b - a);
    }
    return e;
  };
  for (const auto& p : path.points) {
    const double env_x = std::exp(exponent(p.s, true));
    const double env_v = std::exp(exponent(p.s, false));
    const double lx = std::abs(p.J[0]) + std::abs(p.J[3]) + std::abs(p.J[6]);
    c.margin_x = std::min(c.margin_x, env_x - lx);
    for (int j = 1; j < 3; ++j) {
      const double lv = std::abs(p.J[j]) + std::abs(p.J[3 + j]) + std::abs(p.J[6 + j]);
      c.margin_v = std::min(c.margin_v, env_v - lv);
    }
  }
  // Round-off slack relative to the envelope size.
  c.ok = c.margin_x >= -1e-9 && c.margin_v >= -1e-9;
  return c;
}

/// Psi(t, x, v) = chi(X(T), V(T)) along the characteristic through (t, x, v).
inline double dual_vlasov(const std::function<double(double, double, double)>& chi, const FieldSampler& S, double t, double x, double v1,
                          double v2, double tol = 1e-10) {
  const double T = S.breaks.back();
  detail::OdeState y{x, v1, v2};
  bool exited = false;
  detail::integrate_slabwise(S, y, t, T, 1, false, exited, [](const detail::OdeState&, double) {}, tol);
  return chi(y[0], y[1], y[2]);
}

}  // namespace vmsd
