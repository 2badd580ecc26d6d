#pragma once

// Batch commands behind the command-line front end: solve, study,
// verify-dual, estimate. Each returns a process exit code.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vmsd/config.hpp"
#include "vmsd/coupling.hpp"
#include "vmsd/csv.hpp"
#include "vmsd/dual_oracle.hpp"
#include "vmsd/estimator.hpp"
#include "vmsd/scenarios.hpp"

namespace vmsd {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kNonConvergence = 3, kVerificationFailure = 4 };

/// Which unknown a study measures: the distribution when the scenario
/// carries particles, the fields otherwise.
enum class Measure { distribution, fields };

inline Measure primary_measure(const Scenario& s) { return s.problem.f0 ? Measure::distribution : Measure::fields; }

/// Everything a study needs from one mesh level.
struct LevelResult {
  int level = 0;
  int M = 0, nx = 0, nv = 0;
  double h = 0.0;
  bool converged = false;
  int iterations = 0;
  Increment last_increment;
  EstimatorReport report;
  double eta = 0.0;                   // estimator of the measured unknown
  std::optional<double> l2, hm1;      // true errors where an exact solution exists
  Effectivity eff;
  double gauss_residual = 0.0;        // sqrt(sum_m ||d_x E1 - rho||^2_{S_m})
  double mass_defect = 0.0;           // |int f_h(T) - int P f0|
  double initial_charge = 0.0;        // int rho(0, x) dx
  double seconds = 0.0;
};

struct LevelRun {
  LevelResult result;
  IterationState state;
};

inline LevelRun run_level(const Scenario& s, const SlabMesh& mesh, int degree, const SDParameters& sd, const StopRule& stop, int level = 0,
                          bool measure_errors = true) {
  const auto t0 = std::chrono::steady_clock::now();
  Discretization D(mesh, degree, sd);
  LevelRun out;
  out.state = iterate(D, s.problem, stop);
  const IterationState& st = out.state;
  LevelResult& r = out.result;
  r.level = level;
  r.M = mesh.time().slabs();
  r.nx = mesh.grid().nx();
  r.nv = mesh.grid().nv1();
  r.h = mesh.h();
  r.converged = st.converged;
  r.iterations = st.i;
  r.last_increment = iteration_error_proxy(st);
  r.report = estimate(D, st);

  const Measure which = primary_measure(s);
  r.eta = which == Measure::distribution ? r.report.eta_vlasov : r.report.eta_maxwell;
  if (measure_errors) {
    if (which == Measure::distribution && s.has_exact_f) {
      r.l2 = l2_error(D.phase(), st.f, s.problem.f_exact);
      r.hm1 = h_minus_one_error_final(D.phase(), st.f, s.f_exact_T);
    } else if (which == Measure::fields && s.has_exact_W) {
      r.l2 = l2_error(D.fields(), st.W, s.problem.W_exact);
      r.hm1 = h_minus_one_error(D.fields(), st.W, s.problem.W_exact);
    }
    if (r.hm1) r.eff = effectivity(r.eta, *r.hm1);
  }

  double g2 = 0.0;
  if (st.fields_solved)
    for (double g : gauss_law_residual(D.fields(), st.W, st.sources)) g2 += g * g;
  r.gauss_residual = std::sqrt(g2);
  const Eigen::VectorXd fT = st.f.slabs.empty() ? st.f0_trace : D.phase().trace(st.f.slabs.back(), true);
  r.mass_defect = std::abs(total_mass(D.phase(), fT) - total_mass(D.phase(), st.f0_trace));
  const MomentSnapshot m0 = compute_moments_at(D.phase(), st.f0_trace, st.rho_b);
  for (std::size_t q = 0; q < m0.x.size(); ++q) r.initial_charge += D.phase().x_axis().quad.weights[q] * m0.rho[q];
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// log2(e_l / e_{l+1}); empty if either value is missing or zero.
inline std::optional<double> observed_rate(std::optional<double> coarse, std::optional<double> fine) {
  if (!coarse || !fine || !(*coarse > 0.0) || !(*fine > 0.0)) return std::nullopt;
  return std::log2(*coarse / *fine);
}

inline std::vector<LevelResult> run_ladder(const Scenario& s, SlabMesh mesh, int levels, int degree, const SDParameters& sd,
                                           const StopRule& stop, std::ostream* log = nullptr) {
  std::vector<LevelResult> out;
  for (int l = 0; l < levels; ++l) {
    out.push_back(run_level(s, mesh, degree, sd, stop, l).result);
    if (log) {
      const auto& r = out.back();
      *log << "  level " << l << " (M,nx,nv)=(" << r.M << "," << r.nx << "," << r.nv << ") h=" << r.h << " eta=" << r.eta;
      if (r.l2) *log << " L2=" << *r.l2;
      if (r.hm1) *log << " H-1=" << *r.hm1;
      *log << " [" << std::fixed << std::setprecision(1) << r.seconds << " s]" << std::defaultfloat << std::setprecision(6) << '\n';
    }
    if (l + 1 < levels) mesh = refine_once(mesh);
  }
  return out;
}

namespace detail {

inline std::filesystem::path out_path(const RunConfig& c, const char* file) { return std::filesystem::path(c.out_dir) / file; }

inline std::vector<std::string> estimator_header() {
  return {"level", "estimator", "h", "hR1", "hR2", "eta", "true_err", "effectivity"};
}

inline void estimator_rows(CsvWriter& w, const LevelResult& r, Measure which) {
  const auto& rep = r.report;
  const std::optional<double> none;
  auto row = [&](const char* name, const ResidualNorms& n, double eta_value, bool measured) {
    w.row({static_cast<long long>(r.level), std::string(name), n.h, n.total_hR1(), n.total_hR2(), eta_value, measured ? r.hm1 : none,
           measured ? r.eff.value : none});
  };
  row("maxwell", rep.maxwell, rep.eta_maxwell, which == Measure::fields);
  row("vlasov", rep.vlasov, rep.eta_vlasov, which == Measure::distribution);
}

inline SDParameters sd_of(const RunConfig& c) {
  SDParameters sd;
  sd.c_delta = c.c_delta;
  return sd;
}

inline StopRule stop_of(const RunConfig& c) { return {c.picard_tol, c.picard_max_iter}; }

}  // namespace detail

/// solve: one run; increments, snapshots, diagnostics and estimator CSVs.
inline int cmd_solve(const RunConfig& c, std::ostream& log = std::cout) {
  const Scenario s = c.scenario_data();
  const SlabMesh mesh = c.mesh();
  const std::string prov = provenance("solve", hex64(c.hash));
  Discretization D(mesh, c.degree, detail::sd_of(c));
  const IterationState st = iterate(D, s.problem, detail::stop_of(c));
  const PhaseSpace& V = D.phase();
  const FieldSpace& F = D.fields();

  {
    CsvWriter w(detail::out_path(c, "increments.csv"), prov, {"iteration", "f_increment", "W_increment", "f_norm", "W_norm", "linear_iterations"});
    for (std::size_t i = 0; i < st.increments.size(); ++i) {
      const auto& inc = st.increments[i];
      w.row({static_cast<long long>(i + 1), inc.f, inc.W, inc.f_norm, inc.W_norm, static_cast<long long>(st.linear_iterations[i])});
    }
  }

  // Sample points: mesh nodes and cell midpoints.
  auto samples = [](const std::vector<double>& nodes) {
    std::vector<double> s;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
      s.push_back(nodes[i]);
      s.push_back(0.5 * (nodes[i] + nodes[i + 1]));
    }
    s.push_back(nodes.back());
    return s;
  };
  const auto xs = samples(mesh.grid().x_nodes());
  {
    CsvWriter w(detail::out_path(c, "fields.csv"), prov, {"t", "x", "E1", "E2", "B"});
    const auto& tb = mesh.time().breakpoints();
    for (std::size_t m = 0; m < st.W.slabs.size(); ++m) {
      const SlabFunction& wm = st.W.slabs[m];
      for (double t : m == 0 ? std::vector<double>{tb[0], tb[1]} : std::vector<double>{tb[m + 1]})
        for (double x : xs) {
          const auto v = F.evaluate(wm, t, x);
          w.row({t, x, v[0], v[1], v[2]});
        }
    }
  }
  {
    CsvWriter w(detail::out_path(c, "distribution.csv"), prov, {"t", "x", "v1", "v2", "f"});
    const auto& n1 = mesh.grid().v1_nodes();
    const auto& n2 = mesh.grid().v2_nodes();
    const Eigen::VectorXd fT = st.f.slabs.empty() ? st.f0_trace : V.trace(st.f.slabs.back(), true);
    for (const auto& [t, tr] : {std::pair<double, const Eigen::VectorXd*>{0.0, &st.f0_trace}, {s.T, &fT}})
      for (double x : mesh.grid().x_nodes())
        for (double v1 : n1)
          for (double v2 : n2) w.row({t, x, v1, v2, V.evaluate_spatial(*tr, x, v1, v2)});
  }

  const double f0_l1 = l1_norm(V, st.f0_trace);
  bool boundary_flag = false;
  {
    CsvWriter w(detail::out_path(c, "diagnostics.csv"), prov,
                {"slab", "t", "gauss_residual", "total_mass", "boundary_mass", "undershoot", "linear_iterations"});
    const std::vector<double> gauss =
        st.fields_solved ? gauss_law_residual(F, st.W, st.sources) : std::vector<double>(st.f.slabs.size(), 0.0);
    for (std::size_t m = 0; m < st.f.slabs.size(); ++m) {
      const Eigen::VectorXd tr = V.trace(st.f.slabs[m], true);
      const double bm = boundary_mass(V, tr);
      if (bm > 1e-8 * f0_l1) boundary_flag = true;
      w.row({static_cast<long long>(m + 1), mesh.time().breakpoints()[m + 1], gauss[m], total_mass(V, tr), bm, undershoot(V, st.f.slabs[m]),
             static_cast<long long>(st.f.iterations[m])});
    }
  }

  LevelResult r;
  r.h = mesh.h();
  r.report = estimate(D, st);
  const Measure which = primary_measure(s);
  if (which == Measure::distribution && s.has_exact_f)
    r.hm1 = h_minus_one_error_final(V, st.f, s.f_exact_T);
  else if (which == Measure::fields && s.has_exact_W)
    r.hm1 = h_minus_one_error(F, st.W, s.problem.W_exact);
  r.eta = which == Measure::distribution ? r.report.eta_vlasov : r.report.eta_maxwell;
  if (r.hm1) r.eff = effectivity(r.eta, *r.hm1);
  {
    CsvWriter w(detail::out_path(c, "estimator.csv"), prov, detail::estimator_header());
    detail::estimator_rows(w, r, which);
  }

  log << "scenario " << c.scenario << ": " << st.i << " Picard iterations, " << (st.converged ? "converged" : "NOT converged") << '\n';
  log << "  eta_maxwell = " << r.report.eta_maxwell << ", eta_vlasov = " << r.report.eta_vlasov << ", ||G||_inf = " << r.report.G_sup << '\n';
  if (r.hm1) log << "  H^-1 error = " << *r.hm1 << '\n';
  if (boundary_flag) log << "  warning: mass near the velocity boundary exceeds 1e-8 ||f0||_1; enlarge the velocity box\n";
  log << "  output written to " << c.out_dir << '\n';
  return st.converged ? kSuccess : kNonConvergence;
}

/// estimate: one run, estimator table only.
inline int cmd_estimate(const RunConfig& c, std::ostream& log = std::cout) {
  const Scenario s = c.scenario_data();
  const LevelRun run = run_level(s, c.mesh(), c.degree, detail::sd_of(c), detail::stop_of(c));
  const LevelResult& r = run.result;
  CsvWriter w(detail::out_path(c, "estimator.csv"), provenance("estimate", hex64(c.hash)), detail::estimator_header());
  detail::estimator_rows(w, r, primary_measure(s));
  log << "eta_maxwell = " << r.report.eta_maxwell << "  eta_vlasov = " << r.report.eta_vlasov;
  if (r.hm1) log << "  H^-1 error = " << *r.hm1 << "  effectivity = " << (r.eff.value ? *r.eff.value : 0.0);
  log << '\n';
  return r.converged ? kSuccess : kNonConvergence;
}

/// study: refinement ladder with observed rates.
inline int cmd_study(const RunConfig& c, std::ostream& log = std::cout) {
  if (c.levels < 3) throw ConfigError("study needs at least 3 levels (got " + std::to_string(c.levels) + ")");
  const Scenario s = c.scenario_data();
  log << "study " << c.scenario << ", " << c.levels << " levels\n";
  const auto ladder = run_ladder(s, c.mesh(), c.levels, c.degree, detail::sd_of(c), detail::stop_of(c), &log);
  const std::string prov = provenance("study", hex64(c.hash));
  {
    CsvWriter w(detail::out_path(c, "estimator.csv"), prov, detail::estimator_header());
    for (const auto& r : ladder) detail::estimator_rows(w, r, primary_measure(s));
  }
  CsvWriter w(detail::out_path(c, "rates.csv"), prov,
              {"level", "M", "nx", "nv", "h", "l2_error", "hm1_error", "eta", "effectivity", "rate_l2", "rate_hm1", "rate_eta"});
  log << std::setw(6) << "level" << std::setw(14) << "h" << std::setw(14) << "L2" << std::setw(8) << "rate" << std::setw(14) << "H-1"
      << std::setw(8) << "rate" << std::setw(14) << "eta" << std::setw(8) << "rate" << '\n';
  bool all_converged = true;
  for (std::size_t l = 0; l < ladder.size(); ++l) {
    const auto& r = ladder[l];
    all_converged = all_converged && r.converged;
    std::optional<double> rl2, rhm1, reta;
    if (l > 0) {
      rl2 = observed_rate(ladder[l - 1].l2, r.l2);
      rhm1 = observed_rate(ladder[l - 1].hm1, r.hm1);
      reta = observed_rate(ladder[l - 1].eta, r.eta);
    }
    w.row({static_cast<long long>(l), static_cast<long long>(r.M), static_cast<long long>(r.nx), static_cast<long long>(r.nv), r.h, r.l2, r.hm1,
           r.eta, r.eff.value, rl2, rhm1, reta});
    auto fmt = [](std::optional<double> v, int width, bool fixed) {
      std::ostringstream os;
      if (fixed) os << std::fixed << std::setprecision(2);
      else os << std::scientific << std::setprecision(3);
      if (v) os << std::setw(width) << *v;
      else os << std::setw(width) << "-";
      return os.str();
    };
    log << std::setw(6) << l << fmt(r.h, 14, false) << fmt(r.l2, 14, false) << fmt(rl2, 8, true) << fmt(r.hm1, 14, false)
        << fmt(rhm1, 8, true) << fmt(r.eta, 14, false) << fmt(reta, 8, true) << '\n';
  }
  return all_converged ? kSuccess : kNonConvergence;
}

// ---------------------------------------------------------------------------
// verify-dual

/// Random smooth field-dual source: each component a bump in x (support
/// inside Omega_x) times a smooth time profile.
struct RandomDualSource {
  struct Part {
    double amp, center, radius, a, b, w;
  };
  std::array<Part, 3> parts;

  static RandomDualSource draw(std::mt19937_64& rng, Interval omega) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    RandomDualSource s;
    for (auto& p : s.parts) {
      p.radius = (0.15 + 0.25 * U(rng)) * omega.length();
      p.center = omega.lo + p.radius + (omega.length() - 2 * p.radius) * U(rng);
      p.amp = 2 * U(rng) - 1;
      p.a = 2 * U(rng) - 1;
      p.b = 2 * U(rng) - 1;
      p.w = 1 + 5 * U(rng);
    }
    return s;
  }

  MaxwellDualData data(double T, Interval omega) const {
    MaxwellDualData d;
    d.T = T;
    d.omega = omega;
    const auto P = parts;
    d.chi = [P](double t, double x) {
      std::array<double, 3> v{};
      for (int c = 0; c < 3; ++c) v[c] = P[c].amp * bump(x, P[c].center, P[c].radius) * (1 + P[c].a * t + P[c].b * std::sin(P[c].w * t));
      return v;
    };
    d.chi_x = [P](double t, double x) {
      std::array<double, 3> v{};
      for (int c = 0; c < 3; ++c) v[c] = P[c].amp * bump_dx(x, P[c].center, P[c].radius) * (1 + P[c].a * t + P[c].b * std::sin(P[c].w * t));
      return v;
    };
    return d;
  }
};

struct DualVerification {
  int samples = 0, sample_failures = 0;
  int paths = 0, path_failures = 0, exited = 0;
  double worst_fd_residual = 0.0;
  double worst_sensitivity_mismatch = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  bool ok() const { return sample_failures == 0 && path_failures == 0; }
};

/// Field-dual batch and characteristic batch. Writes dual_maxwell.csv and
/// characteristics.csv when `csv` is set.
inline DualVerification verify_dual(const RunConfig& c, bool csv, std::ostream& log) {
  DualVerification v;
  const Scenario s = c.scenario_data();
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const std::string prov = provenance("verify-dual", hex64(c.hash));
  std::optional<CsvWriter> wm, wc;
  if (csv) {
    wm.emplace(detail::out_path(c, "dual_maxwell.csv"), prov,
               std::vector<std::string>{"sample", "fd_residual", "phi1_x", "T_chi1_x", "phi1", "c_chi1", "phi23", "c_chi23", "phi23_x",
                                        "T_chi23_x", "phi_H1", "c_chi_H1", "ok"});
    wc.emplace(detail::out_path(c, "characteristics.csv"), prov,
               std::vector<std::string>{"path", "x", "v1", "v2", "exited", "margin_x", "margin_v", "sensitivity_mismatch", "ok"});
  }

  for (int k = 0; k < c.verify_samples; ++k) {
    MaxwellDualData d = RandomDualSource::draw(rng, s.box.x).data(s.T, s.box.x);
    d.flip_phi2 = c.mutate_phi2;
    double fd = 0.0;
    for (int p = 0; p < 8; ++p) {
      const double t = s.T * (0.05 + 0.9 * U(rng));
      const double x = s.box.x.lo + s.box.x.length() * (0.05 + 0.9 * U(rng));
      for (double r : dual_maxwell_fd_residual(d, t, x)) fd = std::max(fd, std::abs(r));
    }
    const DualStabilityReport rep = dual_stability_check(d);
    const bool ok = fd <= 1e-6 && rep.ok();
    v.samples++;
    if (!ok) v.sample_failures++;
    v.worst_fd_residual = std::max(v.worst_fd_residual, fd);
    if (wm)
      wm->row({static_cast<long long>(k), fd, rep.phi1_x, rep.T * rep.chi1_x, rep.phi1, rep.c_l2 * rep.chi1, rep.phi23, rep.c_l2 * rep.chi23,
               rep.phi23_x, rep.T * rep.chi23_x, rep.phi_H1, rep.c_h1 * rep.chi_H1, static_cast<long long>(ok)});
  }

  if (c.verify_paths > 0) {
    Discretization D(c.mesh(), c.degree, detail::sd_of(c));
    const IterationState st = iterate(D, s.problem, detail::stop_of(c));
    const FieldSampler S = sample_fields(D.fields(), st.W);
    for (int k = 0; k < c.verify_paths; ++k) {
      const double x = s.box.x.lo + s.box.x.length() * (0.1 + 0.8 * U(rng));
      const double v1 = s.box.v1.lo + s.box.v1.length() * (0.1 + 0.8 * U(rng));
      const double v2 = s.box.v2.lo + s.box.v2.length() * (0.1 + 0.8 * U(rng));
      const CharacteristicPath p = integrate_characteristics(S, 0.0, s.T, x, v1, v2);
      const GronwallCertificate g = gronwall_certificate(p, S);
      const double mm = sensitivity_vs_finite_difference(S, 0.0, s.T, x, v1, v2).max_relative_mismatch();
      const bool ok = g.ok && mm <= 1e-6;
      v.paths++;
      if (!ok) v.path_failures++;
      if (p.exited) v.exited++;
      v.worst_sensitivity_mismatch = std::max(v.worst_sensitivity_mismatch, mm);
      v.worst_margin = std::min({v.worst_margin, g.margin_x, g.margin_v});
      if (wc) wc->row({static_cast<long long>(k), x, v1, v2, static_cast<long long>(p.exited), g.margin_x, g.margin_v, mm, static_cast<long long>(ok)});
    }
  }

  if (v.samples == 0 && v.paths == 0) log << "warning: empty verification batch (verify.samples = verify.paths = 0)\n";
  log << "field dual: " << v.samples - v.sample_failures << "/" << v.samples << " samples pass, worst FD residual " << v.worst_fd_residual << '\n';
  log << "characteristics: " << v.paths - v.path_failures << "/" << v.paths << " paths certified, worst sensitivity mismatch "
      << v.worst_sensitivity_mismatch << ", " << v.exited << " exited\n";
  return v;
}

inline int cmd_verify_dual(const RunConfig& c, std::ostream& log = std::cout) {
  return verify_dual(c, true, log).ok() ? kSuccess : kVerificationFailure;
}

}  // namespace vmsd
