// Acceptance gate: one PASS / FAIL / CONDITIONAL line per criterion.
// Exits nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "vcgate/errors.hpp"
#include "vcgate/expfam.hpp"
#include "vcgate/nulldist.hpp"
#include "vcgate/simharness.hpp"
#include "vcgate/splines.hpp"
#include "vcgate/vctest.hpp"

#ifdef VCGATE_HAVE_CLI
#include <fstream>

#include "cli/config.hpp"
#include "cli/csv.hpp"
#include "json.hpp"
#endif

using namespace vcgate;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

enum class Verdict { pass, fail, conditional };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome judge(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

sim::SimScenario scenario(sim::Model model, expfam::Family family, int n, int m, int reps,
                          std::uint64_t seed) {
  sim::SimScenario s;
  s.model = model;
  s.family = family;
  s.n = n;
  s.m = m;
  s.replicates = reps;
  s.B = 2000;
  s.seed = seed;
  return s;
}

sim::SimRow run_one(const sim::SimScenario& s, vctest::Method method) {
  sim::RunOptions o;
  o.methods = {method};
  o.threads = nulldist::default_threads();
  return sim::run_type1({s}, o).rows.front();
}

Outcome size_criterion(const sim::SimScenario& s, double lo, double hi) {
  const auto row = run_one(s, vctest::Method::arlrt);
  return judge(row.rate >= lo && row.rate <= hi && row.failures == 0,
               fmt("%s: rate %.4f (se %.4f, %d/%d rejections, %d failures) target [%.3f, %.3f], %.0fs",
                   s.label().c_str(), row.rate, row.se, row.rejections, row.replicates - row.failures,
                   row.failures, lo, hi, row.seconds));
}

Outcome criterion1() {
  return size_criterion(scenario(sim::Model::M1, expfam::Family::normal(), 30, 20, 2000, 101), 0.032, 0.062);
}

Outcome criterion2() {
  return size_criterion(scenario(sim::Model::M1, expfam::Family::bernoulli(), 20, 10, 1000, 102), 0.030, 0.072);
}

Outcome criterion3() {
  return size_criterion(scenario(sim::Model::M3, expfam::Family::poisson(), 20, 10, 1000, 103), 0.030, 0.072);
}

Outcome criterion4() {
  sim::RunOptions o;
  o.threads = nulldist::default_threads();
  const auto table = sim::run_type1({scenario(sim::Model::M3, expfam::Family::normal(), 20, 30, 1000, 104)}, o);
  const auto& a = table.rows[0];
  const auto& as = table.rows[1];
  const double slack = 2.0 * std::hypot(a.se, as.se);
  return judge(as.rate < a.rate + slack && a.failures == 0,
               fmt("M3 normal n=20 m=30: as-aRLRT %.4f vs aRLRT %.4f, difference %.4f, 2 SE %.4f", as.rate,
                   a.rate, a.rate - as.rate, slack));
}

#ifdef VCGATE_HAVE_CLI

bool bundled_is_synthetic() {
  std::ifstream in(std::string(VCGATE_DATA_DIR) + "/datasets.json");
  if (!in) return true;
  const auto j = nlohmann::json::parse(in);
  for (const auto& [name, entry] : j.items())
    if (entry.value("synthetic", true)) return true;
  return false;
}

struct Application {
  vctest::TestResult result;
  std::vector<std::string> fixed_names;
  std::size_t n_rows = 0;
  double seconds = 0.0;
};

Application run_application(const std::string& name) {
  const std::string dir = VCGATE_DATA_DIR;
  const auto start = Clock::now();
  const auto cfg = cli::read_model_config(dir + "/" + name + ".json");
  const auto model = cli::build_model(cli::read_csv(dir + "/" + name + ".csv"), cfg);
  vctest::TestProblem p;
  p.spec = model.spec;
  p.y = model.y;
  p.tested_index = model.tested_index;
  p.B = cfg.B;
  p.seed = cfg.seed;
  p.threads = nulldist::default_threads();
  Application app{vctest::run_test(p), model.fixed_names, model.n_rows, 0.0};
  app.seconds = seconds_since(start);
  return app;
}

// Compares named estimates; returns the largest absolute deviation.
double deviation(const Application& app, const std::map<std::string, double>& beta,
                 const std::vector<double>& sigma2, std::string& report) {
  double worst = 0.0;
  for (std::size_t k = 0; k < app.fixed_names.size(); ++k) {
    const auto it = beta.find(app.fixed_names[k]);
    if (it == beta.end()) continue;
    const double d = std::abs(app.result.pql.beta[static_cast<Eigen::Index>(k)] - it->second);
    worst = std::max(worst, d);
    report += fmt(" %s=%.3f(%.3f)", app.fixed_names[k].c_str(), app.result.pql.beta[static_cast<Eigen::Index>(k)],
                  it->second);
  }
  const VectorXd vc = app.result.pql.variance_components();
  for (std::size_t s = 0; s < sigma2.size(); ++s) {
    worst = std::max(worst, std::abs(vc[static_cast<Eigen::Index>(s)] - sigma2[s]));
    report += fmt(" s2_%zu=%.3f(%.3f)", s + 1, vc[static_cast<Eigen::Index>(s)], sigma2[s]);
  }
  return worst;
}

Outcome application_criterion(const std::string& name, std::size_t rows, const std::map<std::string, double>& beta,
                              const std::vector<double>& sigma2, double statistic, double max_seconds) {
  const Application app = run_application(name);
  std::string report;
  const double worst = deviation(app, beta, sigma2, report);
  const bool numbers = worst <= 0.05 && std::abs(app.result.statistic - statistic) <= 1.0;
  const bool structure = app.n_rows == rows && app.result.pql.converged && app.result.p_value < 0.001 &&
                         app.seconds < max_seconds;
  std::string detail = fmt("%s: N=%zu converged=%d stat=%.3f(%.3f) p=%.2e %.1fs;", name.c_str(), app.n_rows,
                           static_cast<int>(app.result.pql.converged), app.result.statistic, statistic,
                           app.result.p_value, app.seconds) +
                       report + fmt("; max estimate deviation %.3f", worst);
  if (!structure) return {Verdict::fail, detail};
  if (numbers) return {Verdict::pass, detail};
  if (bundled_is_synthetic())
    return {Verdict::conditional, detail + "; bundled data are synthetic stand-ins, published values not expected"};
  return {Verdict::fail, detail};
}

Outcome criterion5() {
  return application_criterion(
      "salamander", 360,
      {{"cross[R/R]", 0.930}, {"cross[R/W]", 0.283}, {"cross[W/W]", 0.903}, {"cross[W/R]", -1.801}},
      {1.201, 1.142}, 17.074, 60.0);
}

Outcome criterion6() {
  return application_criterion("rikz", 45, {{"(Intercept)", 1.684}, {"NAP", -0.504}}, {0.492}, 16.654, 60.0);
}

#else

Outcome criterion5() { return {Verdict::conditional, "command-line front end not built"}; }
Outcome criterion6() { return {Verdict::conditional, "command-line front end not built"}; }

#endif

std::vector<MatrixXd> outer_products(const lmm::LmmDesign& d) {
  std::vector<MatrixXd> out;
  for (std::size_t s = 0; s < d.n_components(); ++s) out.push_back(d.factor(s) * d.factor(s).transpose());
  return out;
}

// Random instance with N <= 50: intercept and slope, one grouped component
// whose variance ranges from zero to large.
pql::WorkingLmm random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> groups_d(3, 10), per_d(2, 5);
  std::uniform_real_distribution<double> unif;
  std::normal_distribution<double> normal;
  const int groups = groups_d(rng), per = per_d(rng), n = groups * per;
  const double sigma2 = std::array<double, 4>{0.0, 0.1, 1.0, 10.0}[rng() % 4];
  MatrixXd X(n, 2), Z = MatrixXd::Zero(n, groups);
  VectorXd y(n), u(groups);
  for (int g = 0; g < groups; ++g) u[g] = std::sqrt(sigma2) * normal(rng);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = unif(rng);
    Z(i, i / per) = 1.0;
    y[i] = 0.5 - X(i, 1) + u[i / per] + normal(rng);
  }
  return {y, lmm::LmmDesign(X, {{"group", Z, MatrixXd()}})};
}

Outcome criterion7() {
  std::mt19937_64 rng(7007);
  double worst_rel = -1e300, worst_stat = 0.0;
  int max_n = 0;
  for (int k = 0; k < 20; ++k) {
    const auto w = random_instance(rng);
    const auto zz = outer_products(w.design_tilde);
    const MatrixXd& X = w.design_tilde.X();
    const auto grid = oracle::grid_max(X, zz, w.y_tilde, VectorXd::Zero(1), 0, 2000);
    const auto fit = lmm::fit_reml(w.design_tilde, w.y_tilde);
    const auto st = vctest::arlrt_statistic(w, 0);
    const double r0 = oracle::dense_rel(X, zz, w.y_tilde, VectorXd::Zero(1));
    double expected = std::max(0.0, 2.0 * (grid.rel - r0));
    if (expected < vctest::kStatisticFloor) expected = 0.0;
    worst_rel = std::max(worst_rel, grid.rel - fit.rel);
    worst_stat = std::max(worst_stat, std::abs(st.statistic - expected));
    max_n = std::max(max_n, static_cast<int>(w.y_tilde.size()));
  }
  return judge(worst_rel <= 1e-6 && worst_stat <= 2e-6,
               fmt("20 instances (N <= %d): max grid - fit REL %.2e (<= 1e-6), max statistic gap %.2e (<= 2e-6)",
                   max_n, worst_rel, worst_stat));
}

Outcome criterion8() {
  // K = 1 column z, intercept and slope, N = 8.
  MatrixXd X(8, 2);
  VectorXd z(8);
  std::mt19937_64 rng(8008);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 8; ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = i / 7.0;
    z[i] = normal(rng);
  }
  const auto mus = nulldist::projected_eigenvalues(X, z);
  const auto fast = nulldist::simulate_finite_null(mus, 8, 2, 10000, 81, 1);
  const auto brute = oracle::brute_force_rlrt(X, z, 20000, 82);
  const double ks = oracle::ks_distance(fast, brute);

  std::vector<double> big(30);
  for (int k = 0; k < 30; ++k) big[k] = 20.0 / (1 + k);
  const auto start = Clock::now();
  const auto draws = nulldist::simulate_finite_null(big, 600, 2, 10000, 83, 1);
  const double secs = seconds_since(start);
  return judge(ks < 0.02 && secs < 5.0 && draws.size() == 10000u,
               fmt("KS %.4f (< 0.02) against per-draw refits; N=600 q=30 B=10000 in %.2fs (< 5s)", ks, secs));
}

Outcome criterion9() {
  std::vector<std::string> failed;
  const auto check = [&](bool ok, const char* what) {
    if (!ok) failed.emplace_back(what);
  };

  // Link round trips.
  double round_trip = 0.0;
  for (auto family : {expfam::Family::normal(), expfam::Family::bernoulli(), expfam::Family::poisson()}) {
    const auto link = expfam::canonical_link(family);
    for (double eta = -8.0; eta <= 8.0; eta += 0.01)
      round_trip = std::max(round_trip, std::abs(expfam::link_apply(link, expfam::link_inverse(link, eta)) - eta));
  }
  check(round_trip <= 1e-10, "link round trip");

  // Partition of unity.
  VectorXd t(2001);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = 2.0 * i / 2000.0;
  double unity = 0.0;
  for (auto knots : {splines::KnotPlacement::extended, splines::KnotPlacement::clamped}) {
    splines::SplineBasisSpec spec;
    spec.t_max = 2.0;
    spec.knots = knots;
    const MatrixXd B = splines::bspline_design(t, spec);
    unity = std::max(unity, (B.rowwise().sum().array() - 1.0).abs().maxCoeff());
  }
  check(unity <= 1e-12, "partition of unity");

  // Penalty null space.
  const auto pen = splines::difference_penalty(30);
  VectorXd lin(30);
  for (int k = 0; k < 30; ++k) lin[k] = k;
  check((pen.penalty * VectorXd::Ones(30)).cwiseAbs().maxCoeff() == 0.0 &&
            (pen.penalty * lin).cwiseAbs().maxCoeff() == 0.0,
        "penalty null space");

  // Scale invariance and nonnegativity.
  std::mt19937_64 rng(9009);
  double scale_gap = 0.0, smallest = 0.0;
  for (int k = 0; k < 30; ++k) {
    const auto w = random_instance(rng);
    const double base = vctest::arlrt_statistic(w, 0).statistic;
    smallest = std::min(smallest, base);
    for (double c : {1e-3, 0.5, 40.0, 1e4}) {
      const pql::WorkingLmm scaled{c * w.y_tilde, w.design_tilde};
      scale_gap = std::max(scale_gap, std::abs(vctest::arlrt_statistic(scaled, 0).statistic - base));
    }
  }
  check(scale_gap <= 1e-6, "scale invariance");
  check(smallest >= 0.0, "nonnegativity");

  // Seed determinism through the full pipeline.
  auto s = scenario(sim::Model::M1, expfam::Family::poisson(), 8, 6, 1, 99);
  s.effect = 0.5;
  const auto data = sim::generate_dataset(s, 0);
  vctest::TestProblem p;
  p.spec = data.spec;
  p.y = data.y;
  p.tested_index = data.tested_index;
  p.B = 3000;
  p.seed = 1234;
  const auto r1 = vctest::run_test(p);
  p.threads = 3;
  const auto r2 = vctest::run_test(p);
  const auto again = sim::generate_dataset(s, 0);
  check(r1.statistic == r2.statistic && r1.p_value == r2.p_value && data.y == again.y, "seed determinism");

  // Mixture p-value at the chi-square(1) 0.90 quantile.
  const double mix = nulldist::mixture_pvalue(2.7055);
  check(std::abs(mix - 0.05) <= 1e-4 && std::abs(mix - 0.5 * oracle::chisq1_sf(2.7055)) <= 1e-6, "mixture p-value");

  std::string detail = fmt("round trip %.1e, unity %.1e, scale gap %.1e, min statistic %.1e, mixture %.6f",
                           round_trip, unity, scale_gap, smallest, mix);
  for (const auto& f : failed) detail += "; failed: " + f;
  return judge(failed.empty(), detail);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 type-I normal M1", criterion1},       {"2 type-I bernoulli M1", criterion2},
      {"3 type-I poisson M3", criterion3},      {"4 conservative mixture", criterion4},
      {"5 salamander", criterion5},             {"6 rikz", criterion6},
      {"7 oracle equivalence", criterion7},     {"8 finite-sample null", criterion8},
      {"9 property suite", criterion9},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Verdict::fail, std::string("error: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "CONDITIONAL";
    if (o.verdict == Verdict::fail) ++failures;
    std::printf("%-12s criterion %s: %s\n", tag, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
