#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "vcgate/errors.hpp"
#include "vcgate/simharness.hpp"
#include "vcgate/vctest.hpp"

using namespace vcgate;
using namespace vcgate::vctest;
using expfam::Family;

namespace {

pql::WorkingLmm plain_working(const support::Instance& inst) {
  return {inst.y, inst.design};
}

TestProblem m1_problem(Family family, int n, int m, double effect, int rep) {
  sim::SimScenario s;
  s.family = family;
  s.n = n;
  s.m = m;
  s.effect = effect;
  s.seed = 5;
  const auto data = sim::generate_dataset(s, rep);
  TestProblem p;
  p.spec = data.spec;
  p.y = data.y;
  p.tested_index = data.tested_index;
  p.B = 2000;
  p.seed = 17;
  return p;
}

}  // namespace

TEST(ArlrtStatistic, MatchesGridOracle) {
  std::mt19937_64 rng(61);
  for (int rep = 0; rep < 5; ++rep) {
    auto inst = support::random_intercept(6, 5, 1.0, rng);
    const auto st = arlrt_statistic(plain_working(inst), 0);
    const auto zz = support::outer_products(inst.design);
    const double r0 = oracle::dense_rel(inst.design.X(), zz, inst.y, VectorXd::Zero(1));
    const auto g = oracle::grid_max(inst.design.X(), zz, inst.y, VectorXd::Zero(1), 0);
    const double expected = std::max(0.0, 2.0 * (g.rel - r0));
    EXPECT_NEAR(st.statistic, expected < kStatisticFloor ? 0.0 : expected, 2e-6);
    EXPECT_NEAR(st.statistic, std::max(0.0, 2.0 * (st.alt_fit.rel - st.null_fit.rel)), 1e-8);
    EXPECT_EQ(st.null_fit.ratios[0], 0.0);
  }
}

TEST(ArlrtStatistic, BoundaryAlternativeGivesZero) {
  std::mt19937_64 rng(67);
  int seen = 0;
  for (int rep = 0; rep < 40; ++rep) {
    auto inst = support::random_intercept(6, 5, 0.0, rng);
    const auto st = arlrt_statistic(plain_working(inst), 0);
    if (st.alt_fit.ratios[0] == 0.0) {
      EXPECT_EQ(st.statistic, 0.0);
      ++seen;
    }
    EXPECT_GE(st.statistic, 0.0);
  }
  EXPECT_GT(seen, 0);
}

TEST(ArlrtStatistic, ScaleInvariance) {
  std::mt19937_64 rng(71);
  for (int rep = 0; rep < 10; ++rep) {
    auto inst = support::random_intercept(8, 4, 0.6, rng);
    const double base = arlrt_statistic(plain_working(inst), 0).statistic;
    for (double c : {0.01, 7.0, 1e3}) {
      pql::WorkingLmm scaled{c * inst.y, inst.design};
      EXPECT_NEAR(arlrt_statistic(scaled, 0).statistic, base, 1e-6);
    }
  }
}

TEST(ArlrtStatistic, NuisanceComponentStaysFree) {
  sim::SimScenario s;
  s.model = sim::Model::M2;
  s.n = 10;
  s.m = 8;
  s.effect = 0.5;
  s.seed = 3;
  const auto data = sim::generate_dataset(s, 0);
  ASSERT_EQ(data.tested_index, 1u);
  const auto st = arlrt_statistic({data.y, data.spec.design}, 1);
  EXPECT_EQ(st.null_fit.ratios[1], 0.0);
  EXPECT_GT(st.null_fit.ratios[0], 0.0);
  EXPECT_GE(st.alt_fit.rel, st.null_fit.rel);
}

TEST(RunTest, RecordsStochasticInputs) {
  auto p = m1_problem(Family::bernoulli(), 10, 10, 1.0, 0);
  const auto r = run_test(p);
  EXPECT_EQ(r.method, Method::arlrt);
  EXPECT_EQ(r.null_distribution.kind, nulldist::NullKind::finite_sample);
  EXPECT_EQ(r.null_distribution.B, 2000);
  EXPECT_EQ(r.null_distribution.seed, 17u);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LE(r.p_value, 1.0);
  EXPECT_NEAR(r.statistic, std::max(0.0, 2.0 * (r.alt_fit.rel - r.null_fit.rel)), 1e-8);
}

TEST(RunTest, ZeroStatisticGivesUnitP) {
  std::mt19937_64 rng(73);
  for (int rep = 0; rep < 40; ++rep) {
    auto inst = support::random_intercept(5, 6, 0.0, rng);
    TestProblem p;
    p.spec = pql::make_spec(Family::normal(), inst.design);
    p.y = inst.y;
    p.B = 500;
    const auto r = run_test(p);
    if (r.statistic == 0.0) {
      EXPECT_EQ(r.p_value, 1.0);
      EXPECT_EQ(as_arlrt(p).p_value, 1.0);
      return;
    }
  }
  FAIL() << "no boundary replicate in 40 draws";
}

TEST(RunTest, ArlrtAndMixtureShareStatistic) {
  for (int rep = 0; rep < 3; ++rep) {
    auto p = m1_problem(Family::poisson(), 8, 6, 0.4, rep);
    const auto a = run_test(p);
    const auto b = as_arlrt(p);
    EXPECT_EQ(a.statistic, b.statistic);
    EXPECT_EQ(b.method, Method::as_arlrt);
    EXPECT_EQ(b.null_distribution.kind, nulldist::NullKind::chisq_mixture);
    EXPECT_DOUBLE_EQ(b.p_value, nulldist::mixture_pvalue(b.statistic));
    const auto both = run_both(p);
    EXPECT_EQ(both.statistic, a.statistic);
    EXPECT_EQ(both.p_finite, a.p_value);
    EXPECT_EQ(both.p_mixture, b.p_value);
  }
}

TEST(RunTest, Reproducible) {
  auto p = m1_problem(Family::bernoulli(), 10, 10, 0.8, 1);
  const auto a = run_test(p);
  const auto b = run_test(p);
  EXPECT_EQ(a.statistic, b.statistic);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_EQ(a.pql.beta, b.pql.beta);
}

TEST(RunTest, ConstantResponseRejected) {
  auto p = m1_problem(Family::normal(), 4, 5, 0.0, 0);
  p.y.setConstant(2.0);
  try {
    run_test(p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_data);
  }
}

TEST(RunTest, StrongEffectRejects) {
  auto p = m1_problem(Family::normal(), 10, 10, 2.0, 0);
  EXPECT_LT(run_test(p).p_value, 0.01);
}
