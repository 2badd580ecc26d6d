#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "vmsd/estimator.hpp"
#include "vmsd/scenarios.hpp"

using namespace vmsd;

namespace {

constexpr double kPi = std::numbers::pi;

SourceMoments constant_sources(const FieldSpace& V, double rho, double j1, double j2) {
  const Eigen::Index n = static_cast<Eigen::Index>(V.t_axis().qpoints()) * V.x_axis().qpoints();
  SourceMoments b;
  for (int m = 1; m <= V.time().slabs(); ++m)
    b.slabs.push_back({Eigen::VectorXd::Constant(n, rho), Eigen::VectorXd::Constant(n, j1), Eigen::VectorXd::Constant(n, j2)});
  return b;
}

template <class F>
double integrate_cells(const std::vector<double>& nodes, F&& f) {
  double s = 0.0;
  for (std::size_t c = 0; c + 1 < nodes.size(); ++c)
    s += boost::math::quadrature::gauss<double, 10>::integrate(f, nodes[c], nodes[c + 1]);
  return s;
}

}  // namespace

TEST(Estimator, ZeroScenarioGivesZero) {
  const Scenario s = make_scenario("zero");
  const Discretization D(build_uniform(s.T, 2, 4, 4, s.box), 1, {});
  const IterationState st = iterate(D, s.problem);
  const EstimatorReport r = estimate(D, st);
  EXPECT_EQ(r.eta_maxwell, 0.0);
  EXPECT_EQ(r.eta_vlasov, 0.0);
  for (double v : r.maxwell.hR2) EXPECT_EQ(v, 0.0);
  for (double v : r.vlasov.hR2) EXPECT_EQ(v, 0.0);
}

TEST(Estimator, FieldsOffReportsZeroFieldResiduals) {
  const Scenario s = make_scenario("free-streaming");
  const Discretization D(build_uniform(s.T, 2, 4, 4, s.box), 1, {});
  const EstimatorReport r = estimate(D, iterate(D, s.problem));
  EXPECT_EQ(r.eta_maxwell, 0.0);
  EXPECT_GT(r.eta_vlasov, 0.0);
  EXPECT_EQ(r.maxwell.hR1.size(), 2u);
}

// A history that is continuous in time across slabs has no jumps.
TEST(Estimator, TimeContinuousHistoryHasZeroJumpResidual) {
  const SlabMesh mesh = build_uniform(1.0, 3, 4, 3, {{-1, 1}, {-1, 1}, {-1, 1}});
  auto w = [](double t, double x) { return std::array<double, 3>{(1 + 2 * t) * (1 - x * x), t * (1 - x * x), -(1 - x * x)}; };
  auto f = [](double t, double x, double v1, double v2) { return (2 - t) * (1 - x * x) * (1 - v1 * v1) * (1 - v2 * v2); };
  // Quadratic in x and v: exactly representable with k = 2.
  const FieldSpace F2(mesh, 2);
  const PhaseSpace V2(mesh, 2);
  FieldHistory W{F2.project_spatial([&](double x) { return w(0, x); }), {}};
  DistributionHistory H{V2.project_spatial([&](double x, double v1, double v2) { return f(0, x, v1, v2); }), {}, {}};
  for (int m = 1; m <= 3; ++m) {
    W.slabs.push_back(F2.project(m, w));
    H.slabs.push_back(V2.project(m, f));
  }
  const MaxwellSolver S(F2, mesh.field_h(), {});
  const ResidualNorms rm = residuals_maxwell(S, W, constant_sources(F2, 0, 0, 0));
  for (double v : rm.hR2) EXPECT_LT(v, 1e-13);
  DriftField G = zero_drift(V2);
  const ResidualNorms rv = residuals_vlasov(V2, mesh.h(), H, G);
  for (double v : rv.hR2) EXPECT_LT(v, 1e-13);
}

// E1 = (1 + t) beta(x), rho = (1 + t) beta', j1 = -beta is reproduced by the scheme.
TEST(Estimator, ExactPolynomialSolutionHasZeroResiduals) {
  const SlabMesh mesh = build_uniform(1.0, 2, 1, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace F(mesh, 2);
  const MaxwellSolver S(F, mesh.field_h(), {});
  SourceMoments b;
  for (int m = 1; m <= 2; ++m) {
    const auto tp = F.t_axis().points(F.time().slab(m));
    const auto& xp = F.x_axis().quad.points;
    SlabMoments sm{Eigen::VectorXd(tp.size() * xp.size()), Eigen::VectorXd(tp.size() * xp.size()), Eigen::VectorXd::Zero(tp.size() * xp.size())};
    for (std::size_t a = 0; a < tp.size(); ++a)
      for (std::size_t q = 0; q < xp.size(); ++q) {
        sm.rho[a * xp.size() + q] = (1 + tp[a]) * (-2 * xp[q]);
        sm.j1[a * xp.size() + q] = -(1 - xp[q] * xp[q]);
      }
    b.slabs.push_back(sm);
  }
  const FieldHistory W = S.march(F.project_spatial([](double x) { return std::array<double, 3>{1 - x * x, 0, 0}; }), b);
  const ResidualNorms r = residuals_maxwell(S, W, b);
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_LT(r.hR1[m], 1e-10);
    EXPECT_LT(r.hR2[m], 1e-10);
  }
}

// With k = 0 the field space is empty, so R1 is the source itself.
TEST(Estimator, DegreeZeroResidualIsTheSource) {
  const double T = 0.5;
  const SlabMesh mesh = build_uniform(T, 1, 3, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace F(mesh, 0);
  ASSERT_EQ(F.slab_size(), 0);
  const MaxwellSolver S(F, mesh.field_h(), {});
  const SourceMoments b = constant_sources(F, 1.0, 2.0, 0.0);
  const FieldHistory W = S.march(Eigen::VectorXd::Zero(0), b);
  const ResidualNorms r = residuals_maxwell(S, W, b);
  EXPECT_NEAR(r.hR1[0], mesh.field_h() * std::sqrt((1.0 + 4.0) * T * 2.0), 1e-13);
  EXPECT_EQ(r.hR2[0], 0.0);
}

TEST(Estimator, EtaCombinations) {
  ResidualNorms z;
  z.hR1 = {0, 0};
  z.hR2 = {0, 0};
  EXPECT_EQ(eta_maxwell(z), 0.0);
  EXPECT_EQ(eta_vlasov(z, 3.0), 0.0);
  ResidualNorms r;
  r.hR1 = {3, 4};
  r.hR2 = {1, 0};
  EXPECT_DOUBLE_EQ(eta_maxwell(r), 6.0);
  EXPECT_DOUBLE_EQ(eta_vlasov(r, 0.0), 2 * 5.0 + 1.0);
  EXPECT_DOUBLE_EQ(eta_vlasov(r, 1.5), 3.5 * 5.0 + 1.0);
  const EstimatorReport e = eta(r, r, 1.5);
  EXPECT_DOUBLE_EQ(e.eta_maxwell_T, e.eta_maxwell);
}

TEST(Estimator, Effectivity) {
  const Effectivity one = effectivity(0.3, 0.3);
  ASSERT_TRUE(one.value);
  EXPECT_DOUBLE_EQ(*one.value, 1.0);
  const Effectivity exact = effectivity(0.0, 0.0);
  EXPECT_FALSE(exact.value);
  EXPECT_TRUE(exact.exact);
  const Effectivity undefined = effectivity(1e-3, 0.0);
  EXPECT_FALSE(undefined.value);
  EXPECT_FALSE(undefined.exact);
}

// ||h R2||^2 on slab m equals |I_m| ||W_+ - W_-||^2 at t_{m-1}, by a direct interface integral.
TEST(Estimator, JumpResidualMatchesInterfaceNorm) {
  const SlabMesh mesh = build_uniform(0.9, 3, 5, 1, {{-1, 1}, {-1, 1}, {-1, 1}});
  const FieldSpace F(mesh, 2);
  const MaxwellSolver S(F, mesh.field_h(), {});
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  FieldHistory W;
  W.initial.resize(F.trace_size());
  for (auto& v : W.initial) v = g(rng);
  for (int m = 1; m <= 3; ++m) {
    SlabFunction w = F.zero(m);
    for (auto& v : w.coeffs) v = g(rng);
    W.slabs.push_back(w);
  }
  const ResidualNorms r = residuals_maxwell(S, W, constant_sources(F, 0, 0, 0));
  const auto& Sx = F.x_axis().space;
  for (int m = 1; m <= 3; ++m) {
    const double t = F.time().slab(m).lo;
    const double j2 = integrate_cells(Sx.nodes(), [&](double x) {
      const auto plus = F.evaluate(W.slabs[m - 1], t, x);
      double s = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double minus = m == 1 ? Sx.evaluate(W.initial.segment(c * F.nxd(), F.nxd()), x) : F.evaluate(W.slabs[m - 2], t, x)[c];
        s += std::pow(plus[c] - minus, 2);
      }
      return s;
    });
    EXPECT_NEAR(r.hR2[m - 1], std::sqrt(F.time().length(m) * j2), 1e-12 * (1 + r.hR2[m - 1]));
  }
}

TEST(Estimator, FreeStreamingEtaDecreasesUnderRefinement) {
  const Scenario s = make_scenario("free-streaming");
  std::vector<double> etas;
  for (auto [M, n] : {std::pair{2, 4}, std::pair{4, 8}, std::pair{8, 16}}) {
    const Discretization D(build_uniform(s.T, M, n, n, s.box), 1, {});
    etas.push_back(estimate(D, iterate(D, s.problem)).eta_vlasov);
  }
  EXPECT_LT(etas[1], etas[0]);
  EXPECT_LT(etas[2], etas[1]);
}

TEST(HMinusOne, SineClosedForm) {
  const double exact = 1.0 / std::sqrt(2 * (kPi * kPi + 1));
  for (int cells : {16, 64}) {
    const double n = h_minus_one_norm([](double x) { return std::sin(kPi * x); }, {0, 1}, cells);
    EXPECT_NEAR(n, exact, 0.01 * exact) << cells;
  }
  EXPECT_NEAR(exact, 0.21447, 1e-5);
}

TEST(HMinusOne, ZeroAndHomogeneity) {
  EXPECT_EQ(h_minus_one_norm([](double) { return 0.0; }, {-1, 2}, 8), 0.0);
  auto u = [](double x) { return std::exp(x) * std::cos(4 * x); };
  const double base = h_minus_one_norm(u, {-1, 2}, 32);
  for (double c : {-3.0, 0.5, 7.0}) EXPECT_NEAR(h_minus_one_norm([&](double x) { return c * u(x); }, {-1, 2}, 32), std::abs(c) * base, 1e-12 * base);
}

TEST(HMinusOne, TensorSineClosedForm) {
  // sin(pi t) sin(pi x) on (0,1)^2: eigenvalue 2 pi^2, norm 1/(2 sqrt(2 pi^2 + 1)).
  const RieszNorm R({{0, 1}, {0, 1}}, {32, 32});
  const double n = R.norm([](const std::array<double, 3>& p) { return std::sin(kPi * p[0]) * std::sin(kPi * p[1]); });
  const double exact = 0.5 / std::sqrt(2 * kPi * kPi + 1);
  EXPECT_NEAR(n, exact, 0.01 * exact);
}

// ||u||_{-1} <= ||u||_0 / sqrt(1 + (pi/L)^2) on an interval of length L.
TEST(HMinusOneProperty, PoincareBound) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g;
  const double L = 3.0;
  for (int trial = 0; trial < 25; ++trial) {
    std::array<double, 6> a;
    for (double& v : a) v = g(rng);
    auto u = [&](double x) {
      double s = 0.0;
      for (int k = 0; k < 6; ++k) s += a[k] * std::cos((k + 0.5 * (trial % 3)) * x);
      return s;
    };
    const double l2 = std::sqrt(boost::math::quadrature::gauss<double, 20>::integrate([&](double x) { return u(x) * u(x); }, 0.0, L));
    EXPECT_LE(h_minus_one_norm(u, {0, L}, 24), l2 / std::sqrt(1 + std::pow(kPi / L, 2)) * (1 + 1e-12));
  }
}

TEST(HMinusOne, ReferenceMeshMustBeFiner) {
  EXPECT_THROW(RieszNorm::refined({{0, 1}}, {8}, 0), ConfigError);
  const RieszNorm R({{0, 1}}, {4});
  EXPECT_THROW(R.require_finer_than({8}), ConfigError);
  EXPECT_NO_THROW(R.require_finer_than({4}));
}

TEST(HMinusOne, MeasuredErrorsVanishForExactFields) {
  const Scenario s = make_scenario("zero");
  const Discretization D(build_uniform(s.T, 2, 4, 4, s.box), 1, {});
  const IterationState st = iterate(D, s.problem);
  EXPECT_EQ(h_minus_one_error(D.fields(), st.W, s.problem.W_exact), 0.0);
  EXPECT_EQ(h_minus_one_error_final(D.phase(), st.f, s.f_exact_T), 0.0);
  EXPECT_EQ(l2_error(D.phase(), st.f, s.problem.f_exact), 0.0);
}
