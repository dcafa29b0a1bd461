#include <benchmark/benchmark.h>

#include "vcgate/lmm.hpp"
#include "vcgate/nulldist.hpp"
#include "vcgate/pql.hpp"
#include "vcgate/simharness.hpp"
#include "vcgate/vctest.hpp"

using namespace vcgate;

namespace {

sim::Dataset dataset(sim::Model model, expfam::Family family, int n, int m) {
  sim::SimScenario s;
  s.model = model;
  s.family = family;
  s.n = n;
  s.m = m;
  s.effect = model == sim::Model::M3 ? 2.0 : 0.5;
  s.seed = 3;
  return sim::generate_dataset(s, 0);
}

void BM_RestrictedLikelihood(benchmark::State& state) {
  const auto d = dataset(sim::Model::M1, expfam::Family::normal(), static_cast<int>(state.range(0)), 20);
  const lmm::RestrictedLikelihood rl(d.spec.design, d.y);
  Eigen::VectorXd ratios = Eigen::VectorXd::Constant(1, 0.7);
  for (auto _ : state) benchmark::DoNotOptimize(rl(ratios));
}
BENCHMARK(BM_RestrictedLikelihood)->Arg(10)->Arg(30)->Arg(100);

void BM_FitReml(benchmark::State& state) {
  const auto d = dataset(sim::Model::M2, expfam::Family::normal(), static_cast<int>(state.range(0)), 10);
  for (auto _ : state) benchmark::DoNotOptimize(lmm::fit_reml(d.spec.design, d.y));
}
BENCHMARK(BM_FitReml)->Arg(20)->Arg(100);

void BM_FiniteNull(benchmark::State& state) {
  std::vector<double> mus(30);
  for (int k = 0; k < 30; ++k) mus[k] = 20.0 / (1 + k);
  for (auto _ : state) benchmark::DoNotOptimize(nulldist::simulate_finite_null(mus, 600, 2, 10000, 1, 1));
}
BENCHMARK(BM_FiniteNull)->Unit(benchmark::kMillisecond);

void BM_FitPql(benchmark::State& state) {
  const auto d = dataset(sim::Model::M3, expfam::Family::bernoulli(), 20, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pql::fit_pql(d.spec, d.y));
}
BENCHMARK(BM_FitPql)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_RunTest(benchmark::State& state) {
  const auto d = dataset(sim::Model::M1, expfam::Family::poisson(), 20, 10);
  vctest::TestProblem p;
  p.spec = d.spec;
  p.y = d.y;
  p.tested_index = d.tested_index;
  p.B = 2000;
  for (auto _ : state) benchmark::DoNotOptimize(vctest::run_test(p));
}
BENCHMARK(BM_RunTest)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
