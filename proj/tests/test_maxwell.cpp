#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "vmsd/maxwell.hpp"
#include "vmsd/scenarios.hpp"

using namespace vmsd;

namespace {

using Sources = std::function<std::array<double, 3>(double t, double x)>;  // (rho, j1, j2)

SlabMoments tabulate(const FieldSpace& V, int m, const Sources& s) {
  const auto tp = V.t_axis().points(V.time().slab(m));
  const auto& xp = V.x_axis().quad.points;
  const Eigen::Index n = static_cast<Eigen::Index>(tp.size() * xp.size());
  SlabMoments b{Eigen::VectorXd(n), Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (std::size_t a = 0; a < tp.size(); ++a)
    for (std::size_t q = 0; q < xp.size(); ++q) {
      const auto v = s(tp[a], xp[q]);
      const Eigen::Index i = static_cast<Eigen::Index>(a * xp.size() + q);
      b.rho[i] = v[0];
      b.j1[i] = v[1];
      b.j2[i] = v[2];
    }
  return b;
}

SourceMoments tabulate_all(const FieldSpace& V, const Sources& s) {
  SourceMoments out;
  for (int m = 1; m <= V.time().slabs(); ++m) out.slabs.push_back(tabulate(V, m, s));
  return out;
}

// Space-time L2 error of all three components against an exact field.
double l2_error(const FieldSpace& V, const FieldHistory& H, const FieldSpace::Target& exact) {
  double e2 = 0.0;
  for (const auto& w : H.slabs) {
    const auto tp = V.t_axis().points(V.time().slab(w.slab));
    const auto& xp = V.x_axis().quad.points;
    const Eigen::VectorXd wt = V.weights(w.slab);
    for (int c = 0; c < 3; ++c) {
      const Eigen::VectorXd u = V.on_quadrature(w, c);
      for (std::size_t a = 0; a < tp.size(); ++a)
        for (std::size_t q = 0; q < xp.size(); ++q) {
          const Eigen::Index i = static_cast<Eigen::Index>(a * xp.size() + q);
          e2 += wt[i] * std::pow(u[i] - exact(tp[a], xp[q])[c], 2);
        }
    }
  }
  return std::sqrt(e2);
}

FieldHistory solve_wave(int M, int nx, double c_delta, const Scenario& s, const FieldSpace*& Vout, std::unique_ptr<FieldSpace>& keep,
                        std::unique_ptr<SlabMesh>& mesh_keep) {
  mesh_keep = std::make_unique<SlabMesh>(build_uniform(s.T, M, nx, 1, s.box));
  keep = std::make_unique<FieldSpace>(*mesh_keep, 1);
  Vout = keep.get();
  const MaxwellSolver solver(*keep, mesh_keep->field_h(), {c_delta});
  const Eigen::VectorXd W0 = keep->project_spatial([&](double x) { return std::array<double, 3>{0.0, s.problem.E2_0(x), s.problem.B_0(x)}; });
  return solver.march(W0, tabulate_all(*keep, [](double, double) { return std::array<double, 3>{0, 0, 0}; }));
}

// Quadratic bubble on [lo, hi], representable with k = 2 on a single cell.
struct Bubble {
  double lo, hi;
  double operator()(double x) const { return (x - lo) * (hi - x); }
  double dx(double x) const { return lo + hi - 2 * x; }
};

}  // namespace

TEST(ConstantMatrices, Pattern) {
  Eigen::Matrix<double, 4, 3> M1, M2;
  M1 << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  M2 << 1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 1, 0;
  EXPECT_EQ(ConstantMatrices::M1(), M1);
  EXPECT_EQ(ConstantMatrices::M2(), M2);
  EXPECT_EQ(ConstantMatrices::hat({1, 2, 3}), Eigen::Vector4d(1, 1, 2, 3));
}

TEST(Maxwell, ZeroDataGivesZeroHistory) {
  const SlabMesh mesh = build_uniform(1.0, 3, 6, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace V(mesh, 1);
  const MaxwellSolver solver(V, mesh.field_h(), {});
  const FieldHistory H = solver.march(Eigen::VectorXd::Zero(V.trace_size()), SourceMoments::zeros(3, V.t_axis().qpoints() * V.x_axis().qpoints()));
  ASSERT_EQ(H.slabs.size(), 3u);
  for (const auto& w : H.slabs) EXPECT_EQ(w.coeffs.lpNorm<Eigen::Infinity>(), 0.0);
}

// E1 = (1 + t) beta(x) with rho = (1 + t) beta', j1 = -beta; E2 = B = 0.
TEST(Maxwell, ManufacturedSolutionAnnihilatesSystem) {
  const Bubble beta{-1, 1};
  const SlabMesh mesh = build_uniform(1.0, 2, 1, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace V(mesh, 2);
  const MaxwellSolver solver(V, mesh.field_h(), {});
  auto exact = [&](double t, double x) { return std::array<double, 3>{(1 + t) * beta(x), 0, 0}; };
  const Sources src = [&](double t, double x) { return std::array<double, 3>{(1 + t) * beta.dx(x), -beta(x), 0}; };
  for (int m = 1; m <= 2; ++m) {
    const SlabFunction w = V.project(m, exact);
    const double t0 = V.time().slab(m).lo;
    const Eigen::VectorXd in = V.project_spatial([&](double x) { return exact(t0, x); });
    const SlabSystem sys = solver.assemble_slab(m, tabulate(V, m, src), in);
    EXPECT_LT((sys.A * w.coeffs - sys.rhs).norm(), 1e-10 * sys.rhs.norm()) << "slab " << m;
    const SlabFunction sol = solver.solve_slab(m, tabulate(V, m, src), in);
    EXPECT_LT((sol.coeffs - w.coeffs).lpNorm<Eigen::Infinity>(), 1e-10);
  }
  const FieldHistory H = solver.march(V.project_spatial([&](double x) { return exact(0, x); }), tabulate_all(V, src));
  EXPECT_LT(l2_error(V, H, exact), 1e-10);
  for (double r : gauss_law_residual(V, H, tabulate_all(V, src))) EXPECT_LT(r, 1e-12);
}

TEST(Maxwell, GalerkinResidualOfComputedSolution) {
  const SlabMesh mesh = build_uniform(0.6, 3, 7, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  for (int k = 1; k <= 3; ++k) {
    const FieldSpace V(mesh, k);
    const MaxwellSolver solver(V, mesh.field_h(), {});
    std::mt19937_64 rng(k);
    std::normal_distribution<double> g;
    Eigen::VectorXd in(V.trace_size());
    for (auto& v : in) v = g(rng);
    const double a = g(rng), b = g(rng);
    const Sources src = [&](double t, double x) { return std::array<double, 3>{a * std::sin(3 * x + t), b * x * x, std::cos(t * x)}; };
    for (int m = 1; m <= 3; ++m) {
      const SlabSystem sys = solver.assemble_slab(m, tabulate(V, m, src), in);
      const SlabFunction w = solver.solve_slab(m, tabulate(V, m, src), in);
      EXPECT_LT((sys.A * w.coeffs - sys.rhs).norm(), 1e-10 * sys.rhs.norm()) << "k=" << k << " m=" << m;
      in = V.trace(w, true);
    }
  }
}

TEST(Maxwell, WaveSubsystemConvergesToDAlembert) {
  const Scenario s = make_scenario("wave-subsystem");
  std::vector<double> err;
  for (int level = 0; level < 3; ++level) {
    const FieldSpace* V;
    std::unique_ptr<FieldSpace> keep;
    std::unique_ptr<SlabMesh> mesh;
    const FieldHistory H = solve_wave(8 << level, 16 << level, 0.5, s, V, keep, mesh);
    err.push_back(l2_error(*V, H, s.problem.W_exact));
  }
  for (std::size_t i = 1; i < err.size(); ++i) EXPECT_LT(err[i], err[i - 1]);
  EXPECT_GE(std::log2(err[1] / err[2]), 1.4);
}

// Observed rates should not depend much on the stabilisation constant.
TEST(Maxwell, RatesInsensitiveToDeltaConstant) {
  const Scenario s = make_scenario("wave-subsystem");
  for (double cd : {0.25, 0.5, 1.0}) {
    double e[2];
    for (int level = 1; level < 3; ++level) {
      const FieldSpace* V;
      std::unique_ptr<FieldSpace> keep;
      std::unique_ptr<SlabMesh> mesh;
      const FieldHistory H = solve_wave(8 << level, 16 << level, cd, s, V, keep, mesh);
      e[level - 1] = l2_error(*V, H, s.problem.W_exact);
    }
    EXPECT_GE(std::log2(e[0] / e[1]), 1.4) << "c_delta=" << cd;
  }
}

// With rho equal to the derivative of the discrete E1^0 and j1 = 0, the
// time-constant E1 solves the discrete system.
TEST(Maxwell, StaticE1StaysConstant) {
  const SlabMesh mesh = build_uniform(0.5, 4, 12, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace V(mesh, 1);
  const MaxwellSolver solver(V, mesh.field_h(), {});
  const Eigen::VectorXd W0 = V.project_spatial([](double x) { return std::array<double, 3>{bump(x, 0, 0.6), 0, 0}; });
  const Eigen::VectorXd e1 = W0.head(V.nxd());
  const auto& S = V.x_axis().space;
  const FieldHistory H = solver.march(W0, tabulate_all(V, [&](double, double x) { return std::array<double, 3>{S.evaluate(e1, x, 1), 0, 0}; }));
  for (const auto& w : H.slabs)
    for (int a = 0; a < V.nt(); ++a) EXPECT_LT((w.coeffs.segment(V.index(0, a, 0), V.nxd()) - e1).lpNorm<Eigen::Infinity>(), 1e-10);
  // With the analytic charge density the drift is at discretisation level.
  const Scenario e = make_scenario("e1-static");
  const FieldHistory Ha = solver.march(W0, tabulate_all(V, [&](double, double x) { return std::array<double, 3>{-e.problem.rho_b(x), 0, 0}; }));
  EXPECT_LT(l2_error(V, Ha, e.problem.W_exact), 0.05);
}

TEST(Maxwell, GaussLawResidualZeroForZeroData) {
  const SlabMesh mesh = build_uniform(1.0, 2, 4, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace V(mesh, 1);
  const MaxwellSolver solver(V, mesh.field_h(), {});
  const SourceMoments b = SourceMoments::zeros(2, V.t_axis().qpoints() * V.x_axis().qpoints());
  for (double r : gauss_law_residual(V, solver.march(Eigen::VectorXd::Zero(V.trace_size()), b), b)) EXPECT_EQ(r, 0.0);
}

TEST(Maxwell, DeltaScalesWithMesh) {
  SlabMesh mesh = build_uniform(1.0, 2, 4, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace V(mesh, 1);
  const MaxwellSolver a(V, mesh.field_h(), {});
  EXPECT_NEAR(a.delta(), 0.5 * mesh.field_h(), 1e-15);
  const SlabMesh fine = refine_once(mesh);
  const FieldSpace Vf(fine, 1);
  const MaxwellSolver b(Vf, fine.field_h(), {});
  EXPECT_NEAR(b.delta() / a.delta(), 0.5, 1e-14);
}

// ||W_-(t_M)|| / (||W0|| + sum_m ||b||_m) stays bounded across refinements.
TEST(Maxwell, DiscreteStabilityRatioBounded) {
  std::vector<double> ratio;
  SlabMesh mesh = build_uniform(1.0, 4, 8, 1, {{-2, 2}, {-1, 1}, {-1, 1}});
  for (int level = 0; level < 3; ++level, mesh = refine_once(mesh)) {
    const FieldSpace V(mesh, 1);
    const MaxwellSolver solver(V, mesh.field_h(), {});
    const Sources src = [](double t, double x) {
      return std::array<double, 3>{bump_dx(x, 0.3, 0.5) * (1 + t), std::sin(t) * bump(x, -0.2, 0.7), bump(x, 0.0, 1.0)};
    };
    const Eigen::VectorXd W0 = V.project_spatial([](double x) { return std::array<double, 3>{bump(x, 0, 0.5), bump(x, 0.5, 0.8), -bump(x, -0.4, 0.6)}; });
    const SourceMoments b = tabulate_all(V, src);
    const FieldHistory H = solver.march(W0, b);
    const auto& Mx = V.x_axis().mass;
    auto trace_norm = [&](const Eigen::VectorXd& tr) {
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const Eigen::VectorXd u = tr.segment(static_cast<Eigen::Index>(c) * V.nxd(), V.nxd());
        s += u.dot(Mx * u);
      }
      return std::sqrt(s);
    };
    double data = trace_norm(W0);
    for (int m = 1; m <= V.time().slabs(); ++m) {
      const Eigen::VectorXd w = V.weights(m);
      const auto& sm = b.slabs[m - 1];
      data += std::sqrt(w.dot(sm.rho.cwiseAbs2() + sm.j1.cwiseAbs2() + sm.j2.cwiseAbs2()));
    }
    ratio.push_back(trace_norm(V.trace(H.slabs.back(), true)) / data);
  }
  for (double r : ratio) EXPECT_LT(r, 2.0);
  EXPECT_LT(*std::max_element(ratio.begin(), ratio.end()) / *std::min_element(ratio.begin(), ratio.end()), 1.5);
}
