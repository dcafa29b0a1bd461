#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "vcgate/errors.hpp"
#include "vcgate/lmm.hpp"
#include "vcgate/simharness.hpp"
#include "vcgate/splines.hpp"

using namespace vcgate;
using namespace vcgate::sim;
using expfam::Family;

namespace {

SimScenario make(Model model, Family family, int n, int m, double effect, int reps = 20) {
  SimScenario s;
  s.model = model;
  s.family = family;
  s.n = n;
  s.m = m;
  s.effect = effect;
  s.replicates = reps;
  s.B = 400;
  s.seed = 2024;
  return s;
}

}  // namespace

TEST(Generate, Shapes) {
  const auto m1 = generate_dataset(make(Model::M1, Family::normal(), 5, 4, 1.0), 0);
  EXPECT_EQ(m1.y.size(), 20);
  EXPECT_EQ(m1.spec.design.n_components(), 1u);
  EXPECT_EQ(m1.tested_index, 0u);

  const auto m2 = generate_dataset(make(Model::M2, Family::poisson(), 5, 4, 1.0), 0);
  EXPECT_EQ(m2.spec.design.n_components(), 2u);
  EXPECT_EQ(m2.tested_index, 1u);

  const auto m3 = generate_dataset(make(Model::M3, Family::bernoulli(), 20, 5, 1.0), 0);
  EXPECT_EQ(m3.spec.design.n_components(), 1u);
  EXPECT_EQ(m3.spec.design.random(0).Z.cols(), 28);
  EXPECT_GE(m3.covariate.minCoeff(), 0.0);
  EXPECT_LE(m3.covariate.maxCoeff(), 2.0);

  const auto m4 = generate_dataset(make(Model::M4, Family::binomial(4), 20, 5, 1.0), 0);
  EXPECT_EQ(m4.spec.design.n_components(), 2u);
  EXPECT_EQ(m4.tested_index, 1u);
  for (Eigen::Index i = 0; i < m4.y.size(); ++i) {
    const double k = m4.y[i] * 4.0;
    EXPECT_EQ(k, std::round(k));
  }
}

TEST(Generate, DeterministicPerReplicate) {
  const auto s = make(Model::M1, Family::bernoulli(), 6, 5, 0.5);
  EXPECT_EQ(generate_dataset(s, 3).y, generate_dataset(s, 3).y);
  EXPECT_NE(generate_dataset(s, 3).y, generate_dataset(s, 4).y);
}

TEST(Generate, M3NullIsLinear) {
  const auto s = make(Model::M3, Family::normal(), 10, 5, 0.0);
  const auto d = generate_dataset(s, 0);
  for (Eigen::Index i = 0; i < d.covariate.size(); ++i)
    EXPECT_EQ(splines::true_smooth(d.covariate[i], 0.0), 0.5 - d.covariate[i]);
}

TEST(Generate, M2NullHasCommonSlope) {
  // Under sigma2_1 = 0 and identity link, y - x within each group is the
  // group intercept plus noise; a per-group OLS slope then averages to 1.
  auto s = make(Model::M2, Family::normal(), 200, 30, 0.0);
  const auto d = generate_dataset(s, 0);
  double spread = 0.0, mean = 0.0;
  std::vector<double> slopes;
  for (int g = 0; g < 200; ++g) {
    const auto x = d.covariate.segment(g * 30, 30);
    const auto y = d.y.segment(g * 30, 30);
    const double xm = x.mean(), ym = y.mean();
    const double b = ((x.array() - xm) * (y.array() - ym)).sum() / (x.array() - xm).square().sum();
    slopes.push_back(b);
    mean += b / 200;
  }
  for (double b : slopes) spread += (b - mean) * (b - mean) / 199;
  // Sampling variance of an OLS slope with 30 uniform x and unit noise is about 12/30.
  EXPECT_NEAR(mean, 1.0, 0.15);
  EXPECT_LT(spread, 0.6);
}

TEST(Generate, M1NormalRecoversSlope) {
  const auto s = make(Model::M1, Family::normal(), 10, 20, 0.0);
  double bias = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const auto d = generate_dataset(s, rep);
    bias += (lmm::fit_reml(d.spec.design, d.y).beta[1] - 1.0) / 200;
  }
  EXPECT_LT(std::abs(bias), 0.05);
}

TEST(Harness, ReproducibleAndNoSilentLoss) {
  std::vector<SimScenario> sc{make(Model::M1, Family::bernoulli(), 8, 6, 0.0, 30)};
  RunOptions opt;
  const auto a = run_type1(sc, opt);
  opt.threads = 3;
  const auto b = run_type1(sc, opt);
  ASSERT_EQ(a.rows.size(), 2u);
  for (std::size_t k = 0; k < a.rows.size(); ++k) {
    EXPECT_EQ(a.rows[k].rejections, b.rows[k].rejections);
    EXPECT_EQ(a.rows[k].failures, b.rows[k].failures);
    EXPECT_EQ(a.rows[k].replicates, 30);
    EXPECT_GE(a.rows[k].rate, 0.0);
    EXPECT_LE(a.rows[k].rate, 1.0);
    const int ok = a.rows[k].replicates - a.rows[k].failures;
    EXPECT_NEAR(a.rows[k].se, std::sqrt(a.rows[k].rate * (1 - a.rows[k].rate) / ok), 1e-15);
  }
}

TEST(Harness, Type1RequiresNullEffect) {
  EXPECT_THROW(run_type1({make(Model::M1, Family::normal(), 4, 4, 0.5)}, {}), Error);
}

TEST(Harness, PowerOrderingAndAnchor) {
  std::vector<SimScenario> sc{make(Model::M1, Family::normal(), 8, 5, 2.0, 10),
                              make(Model::M1, Family::normal(), 8, 5, 0.5, 10)};
  RunOptions opt;
  opt.methods = {vctest::Method::arlrt};
  const auto t = run_power(sc, opt);
  ASSERT_EQ(t.rows.size(), 3u);
  EXPECT_EQ(t.rows[0].scenario.effect, 0.0);
  EXPECT_EQ(t.rows[1].scenario.effect, 0.5);
  EXPECT_EQ(t.rows[2].scenario.effect, 2.0);
  EXPECT_THROW(run_power({make(Model::M1, Family::normal(), 8, 5, 1.0),
                          make(Model::M3, Family::normal(), 8, 5, 1.0)}, opt),
               Error);
}

TEST(Harness, PowerIncreasesWithEffect) {
  std::vector<SimScenario> sc;
  for (double e : {0.0, 0.3, 1.5}) sc.push_back(make(Model::M1, Family::bernoulli(), 20, 10, e, 120));
  RunOptions opt;
  opt.methods = {vctest::Method::arlrt};
  const auto t = run_power(sc, opt);
  for (std::size_t k = 1; k < t.rows.size(); ++k)
    EXPECT_GE(t.rows[k].rate + 2 * (t.rows[k].se + t.rows[k - 1].se), t.rows[k - 1].rate);
  EXPECT_GT(t.rows.back().rate, 0.5);
}

TEST(Harness, NormalSizeSanity) {
  auto s = make(Model::M1, Family::normal(), 10, 10, 0.0, 400);
  s.B = 1000;
  RunOptions opt;
  opt.methods = {vctest::Method::arlrt};
  const auto t = run_type1({s}, opt);
  EXPECT_EQ(t.rows[0].failures, 0);
  EXPECT_GE(t.rows[0].rate, 0.017);
  EXPECT_LE(t.rows[0].rate, 0.083);
}

TEST(Harness, CsvLayout) {
  SimTable t;
  SimRow r;
  r.scenario = make(Model::M3, Family::binomial(4), 20, 10, 0.0);
  r.replicates = 10;
  r.rejections = 1;
  r.rate = 0.1;
  r.se = 0.09486832980505137;
  t.rows.push_back(r);
  std::istringstream in(to_csv(t));
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header, kCsvHeader);
  EXPECT_EQ(line.rfind("M3,binomial,20,10,0,aRLRT,10,1,0.1,", 0), 0u) << line;
}

TEST(Standins, Layout) {
  const auto sal = salamander_standin();
  ASSERT_EQ(sal.size(), 360u);
  std::set<int> females, males;
  std::map<std::string, int> crosses;
  std::map<int, int> per_female, per_male;
  for (const auto& r : sal) {
    females.insert(r.female);
    males.insert(r.male);
    ++crosses[r.cross];
    ++per_female[r.female];
    ++per_male[r.male];
    EXPECT_TRUE(r.mated == 0 || r.mated == 1);
  }
  EXPECT_EQ(females.size(), 60u);
  EXPECT_EQ(males.size(), 60u);
  for (const auto& [name, count] : crosses) EXPECT_EQ(count, 90) << name;
  for (const auto& [id, count] : per_female) EXPECT_EQ(count, 6);
  for (const auto& [id, count] : per_male) EXPECT_EQ(count, 6);

  const auto rikz = rikz_standin();
  ASSERT_EQ(rikz.size(), 45u);
  EXPECT_EQ(rikz.back().beach, 9);
  EXPECT_EQ(salamander_standin()[17].mated, sal[17].mated);
}
