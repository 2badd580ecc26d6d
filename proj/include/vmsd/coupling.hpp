#pragma once

// Global-in-time Picard iteration between the field and distribution solvers:
//   f^{h,i-1} -> moments b^{h,i-1} -> Maxwell march W^{h,i} -> drift G -> Vlasov march f^{h,i}.

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vmsd/errors.hpp"
#include "vmsd/fespace.hpp"
#include "vmsd/maxwell.hpp"
#include "vmsd/mesh.hpp"
#include "vmsd/moments.hpp"
#include "vmsd/vlasov.hpp"

namespace vmsd {

/// Initial data and switches of a run. Empty callables mean zero.
struct Problem {
  std::string name;
  PhaseSpace::SpatialTarget f0;
  SpatialField E2_0, B_0;
  SpatialField rho_b;        // empty: neutralising marginal of P f0
  bool fields_off = false;   // drift forced to (vhat1, 0, 0), no field solve
  // Exact solutions where known.
  PhaseSpace::Target f_exact;
  FieldSpace::Target W_exact;
};

struct StopRule {
  double tol = 1e-8;
  int max_iter = 25;
};

/// Spaces and solvers on one mesh.
class Discretization {
 public:
  Discretization(SlabMesh mesh, int degree, SDParameters sd)
      : mesh_(std::move(mesh)),
        degree_(degree),
        sd_(sd),
        F_(std::make_unique<FieldSpace>(mesh_, degree)),
        V_(std::make_unique<PhaseSpace>(mesh_, degree)),
        maxwell_(std::make_unique<MaxwellSolver>(*F_, mesh_.field_h(), sd)),
        vlasov_(std::make_unique<VlasovSolver>(*V_, mesh_.h(), sd)) {}

  Discretization(const Discretization&) = delete;
  Discretization& operator=(const Discretization&) = delete;

  const SlabMesh& mesh() const { return mesh_; }
  int degree() const { return degree_; }
  const SDParameters& sd() const { return sd_; }
  const FieldSpace& fields() const { return *F_; }
  const PhaseSpace& phase() const { return *V_; }
  const MaxwellSolver& maxwell() const { return *maxwell_; }
  const VlasovSolver& vlasov() const { return *vlasov_; }

 private:
  SlabMesh mesh_;
  int degree_;
  SDParameters sd_;
  std::unique_ptr<FieldSpace> F_;
  std::unique_ptr<PhaseSpace> V_;
  std::unique_ptr<MaxwellSolver> maxwell_;
  std::unique_ptr<VlasovSolver> vlasov_;
};

struct Increment {
  double f = 0.0, W = 0.0;          // ||f^i - f^{i-1}||, ||W^i - W^{i-1}||
  double f_norm = 0.0, W_norm = 0.0;  // ||f^i||, ||W^i||
};

/// Final iterate and everything the estimators need from the last step.
struct IterationState {
  int i = 0;
  bool converged = false;
  bool fields_solved = true;  // false when the field solve is switched off
  DistributionHistory f;
  FieldHistory W;
  SourceMoments sources;  // b^{h,i-1}, drove W^{h,i}
  DriftField drift;       // from W^{h,i}, drove f^{h,i}
  SpatialField rho_b;
  Eigen::VectorXd f0_trace, W0_trace;
  std::vector<Increment> increments;
  std::vector<int> linear_iterations;  // Vlasov BiCGSTAB iterations, summed per Picard step
};

/// ||.||_{L2(Q_T)} of a sequence of phase-space slab functions.
inline double l2_norm(const PhaseSpace& V, const std::vector<SlabFunction>& f) {
  double s = 0.0;
  for (const auto& fm : f) {
    if (V.slab_size() == 0) break;
    Dims d{V.nt(), V.nxd(), V.nv1d(), V.nv2d()};
    Eigen::VectorXd M = mode_product(fm.coeffs, d, 0, SparseMatrix(V.t_axis().mass_unit * V.time().length(fm.slab)));
    M = mode_product(M, d, 1, V.x_axis().mass);
    M = mode_product(M, d, 2, V.v1_axis().mass);
    M = mode_product(M, d, 3, V.v2_axis().mass);
    s += fm.coeffs.dot(M);
  }
  return std::sqrt(std::max(0.0, s));
}

/// ||.||_{L2(tilde Q_T)} of a field history (all components).
inline double l2_norm(const FieldSpace& F, const std::vector<SlabFunction>& W) {
  double s = 0.0;
  for (const auto& wm : W) {
    if (F.slab_size() == 0) break;
    Dims d{3, F.nt(), F.nxd()};
    Eigen::VectorXd M = mode_product(wm.coeffs, d, 1, SparseMatrix(F.t_axis().mass_unit * F.time().length(wm.slab)));
    M = mode_product(M, d, 2, F.x_axis().mass);
    s += wm.coeffs.dot(M);
  }
  return std::sqrt(std::max(0.0, s));
}

namespace detail {

inline std::vector<SlabFunction> difference(const std::vector<SlabFunction>& a, const std::vector<SlabFunction>& b) {
  std::vector<SlabFunction> d = a;
  for (std::size_t m = 0; m < d.size(); ++m) d[m].coeffs -= b.at(m).coeffs;
  return d;
}

inline bool identical(const std::vector<SlabFunction>& a, const std::vector<SlabFunction>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t m = 0; m < a.size(); ++m)
    if (a[m].coeffs.size() != b[m].coeffs.size() || a[m].coeffs != b[m].coeffs) return false;
  return true;
}

inline FieldHistory zero_fields(const FieldSpace& F, const Eigen::VectorXd& W0) {
  FieldHistory H;
  H.initial = W0;
  for (int m = 1; m <= F.time().slabs(); ++m) H.slabs.push_back(F.zero(m));
  return H;
}

}  // namespace detail

/// Projected initial data: f0 trace, background, W0 trace. Throws
/// NonNeutralError if the initial charge does not integrate to zero.
struct InitialData {
  Eigen::VectorXd f0_trace, W0_trace;
  SpatialField rho_b, E1_0;
};

inline InitialData prepare_initial_data(const Discretization& D, const Problem& P) {
  const PhaseSpace& V = D.phase();
  const FieldSpace& F = D.fields();
  InitialData init;
  init.f0_trace = P.f0 ? V.project_spatial(P.f0) : Eigen::VectorXd::Zero(V.trace_size());
  init.rho_b = P.rho_b ? P.rho_b : build_neutralizing_background(V, init.f0_trace);
  if (P.fields_off) {
    init.E1_0 = zero_field();
    init.W0_trace = Eigen::VectorXd::Zero(F.trace_size());
    return init;
  }
  auto E1 = std::make_shared<Antiderivative>(initial_E1(V, init.f0_trace, init.rho_b));
  init.E1_0 = [E1](double x) { return (*E1)(x); };
  const SpatialField E2 = P.E2_0 ? P.E2_0 : zero_field();
  const SpatialField B = P.B_0 ? P.B_0 : zero_field();
  init.W0_trace = F.project_spatial([&](double x) { return std::array<double, 3>{(*E1)(x), E2(x), B(x)}; });
  return init;
}

/// Runs the iteration from f^{h,0} = P f0 (constant in time) and W^{h,0} = 0.
/// Reaching max_iter is reported through `converged`, not thrown.
inline IterationState iterate(const Discretization& D, const Problem& P, const StopRule& stop = {}) {
  const PhaseSpace& V = D.phase();
  const FieldSpace& F = D.fields();
  const InitialData init = prepare_initial_data(D, P);

  IterationState st;
  st.rho_b = init.rho_b;
  st.f0_trace = init.f0_trace;
  st.W0_trace = init.W0_trace;
  st.fields_solved = !P.fields_off;

  std::vector<SlabFunction> f_prev;
  for (int m = 1; m <= V.time().slabs(); ++m) f_prev.push_back(V.constant_in_time(m, init.f0_trace));
  FieldHistory W_prev = detail::zero_fields(F, init.W0_trace);
  DistributionHistory f_hist_prev;
  bool have_prev = false;

  for (int i = 1; i <= std::max(1, stop.max_iter); ++i) {
    SourceMoments b = compute_moments(V, f_prev, init.rho_b);
    FieldHistory W = P.fields_off ? detail::zero_fields(F, init.W0_trace) : D.maxwell().march(init.W0_trace, b);
    DriftField G = P.fields_off ? zero_drift(V) : build_drift(F, W, V);
    DistributionHistory f;
    if (have_prev && detail::identical(W.slabs, W_prev.slabs)) {
      // Same drift as the previous step: the (deterministic) Vlasov march would reproduce it.
      f = f_hist_prev;
      f.iterations.assign(f.iterations.size(), 0);
    } else {
      f = D.vlasov().march(init.f0_trace, G);
    }

    Increment inc;
    inc.f = l2_norm(V, detail::difference(f.slabs, f_prev));
    inc.W = l2_norm(F, detail::difference(W.slabs, W_prev.slabs));
    inc.f_norm = l2_norm(V, f.slabs);
    inc.W_norm = l2_norm(F, W.slabs);
    st.increments.push_back(inc);
    int its = 0;
    for (int k : f.iterations) its += k;
    st.linear_iterations.push_back(its);

    st.i = i;
    st.sources = std::move(b);
    st.drift = std::move(G);
    f_prev = f.slabs;
    W_prev = W;
    st.f = f;
    st.W = std::move(W);
    f_hist_prev = std::move(f);
    have_prev = true;

    if (inc.f <= stop.tol * inc.f_norm && inc.W <= stop.tol * inc.W_norm) {
      st.converged = true;
      break;
    }
  }
  return st;
}

/// The last increment pair: the computable stand-in for the iteration error.
inline Increment iteration_error_proxy(const IterationState& st) {
  if (st.increments.empty()) throw InvariantError("iteration_error_proxy: no iterations recorded");
  return st.increments.back();
}

}  // namespace vmsd
