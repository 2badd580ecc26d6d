#include <gtest/gtest.h>

#include <cmath>

#include "vmsd/coupling.hpp"
#include "vmsd/scenarios.hpp"

using namespace vmsd;

namespace {

IterationState run(const std::string& name, int M, int nx, int nv, StopRule stop = {}, GaussianParameters gp = {}) {
  const Scenario s = make_scenario(name, gp);
  const Discretization D(build_uniform(s.T, M, nx, nv, s.box), 1, {});
  return iterate(D, s.problem, stop);
}

}  // namespace

TEST(Coupling, ZeroDataConvergesImmediately) {
  const IterationState st = run("zero", 2, 4, 4);
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.i, 1);
  ASSERT_EQ(st.increments.size(), 1u);
  EXPECT_EQ(st.increments[0].f, 0.0);
  EXPECT_EQ(st.increments[0].W, 0.0);
  const Increment p = iteration_error_proxy(st);
  EXPECT_EQ(p.f, 0.0);
  EXPECT_EQ(p.W, 0.0);
}

// Without fields the second step sees the same drift and reproduces f exactly.
TEST(Coupling, FieldsOffStopsAfterSecondStep) {
  const IterationState st = run("free-streaming", 2, 4, 4);
  EXPECT_TRUE(st.converged);
  EXPECT_EQ(st.i, 2);
  EXPECT_GT(st.increments[0].f, 0.0);
  EXPECT_EQ(st.increments[1].f, 0.0);
  EXPECT_FALSE(st.fields_solved);
}

TEST(Coupling, DeterministicIncrementHistory) {
  const IterationState a = run("coupled-gaussian", 2, 4, 4);
  const IterationState b = run("coupled-gaussian", 2, 4, 4);
  ASSERT_EQ(a.increments.size(), b.increments.size());
  for (std::size_t i = 0; i < a.increments.size(); ++i) {
    EXPECT_EQ(a.increments[i].f, b.increments[i].f);
    EXPECT_EQ(a.increments[i].W, b.increments[i].W);
  }
  for (std::size_t m = 0; m < a.f.slabs.size(); ++m) EXPECT_TRUE(a.f.slabs[m].coeffs == b.f.slabs[m].coeffs);
}

TEST(Coupling, IncrementsDecreaseAfterFirstStep) {
  const IterationState st = run("coupled-gaussian", 4, 8, 8);
  EXPECT_TRUE(st.converged);
  for (std::size_t i = 2; i < st.increments.size(); ++i) {
    EXPECT_LT(st.increments[i].f, st.increments[i - 1].f);
    EXPECT_LT(st.increments[i].W, st.increments[i - 1].W);
  }
  const Increment p = iteration_error_proxy(st);
  EXPECT_LE(p.f, 1e-8 * p.f_norm);
  EXPECT_LE(p.W, 1e-8 * p.W_norm);
}

// For amplitude eps the contraction factor after the second step is O(eps).
TEST(Coupling, WeakCouplingContractsLikeAmplitude) {
  std::vector<double> factor;
  for (double eps : {1e-2, 1e-3}) {
    GaussianParameters gp;
    gp.amplitude = eps;
    const IterationState st = run("coupled-gaussian", 4, 8, 8, {1e-14, 4}, gp);
    ASSERT_GE(st.increments.size(), 3u);
    const double q = st.increments[2].f / st.increments[1].f;
    EXPECT_LE(q, eps) << "eps=" << eps;
    factor.push_back(q);
  }
  EXPECT_NEAR(factor[0] / factor[1], 10.0, 2.0);
}

TEST(Coupling, MaxIterReportedNotThrown) {
  const IterationState st = run("coupled-gaussian", 2, 4, 4, {1e-30, 2});
  EXPECT_FALSE(st.converged);
  EXPECT_EQ(st.i, 2);
  EXPECT_EQ(st.increments.size(), 2u);
}

TEST(Coupling, ProxyNeedsAnIteration) { EXPECT_THROW(iteration_error_proxy(IterationState{}), InvariantError); }

TEST(Coupling, NonNeutralBackgroundRejected) {
  Scenario s = make_scenario("coupled-gaussian");
  s.problem.rho_b = zero_field();
  const Discretization D(build_uniform(s.T, 2, 4, 4, s.box), 1, {});
  EXPECT_THROW(iterate(D, s.problem), NonNeutralError);
}
