#include "vcgate/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "vcgate/errors.hpp"
#include "vcgate/rng.hpp"
#include "vcgate/splines.hpp"

namespace vcgate::sim {

using Eigen::MatrixXd;

namespace {

MatrixXd group_indicator(int n, int m) {
  MatrixXd Z = MatrixXd::Zero(static_cast<Eigen::Index>(n) * m, n);
  for (int i = 0; i < n; ++i) Z.block(static_cast<Eigen::Index>(i) * m, i, m, 1).setOnes();
  return Z;
}

double draw_response(double eta, const expfam::Family& family, Rng& rng) {
  switch (family.kind()) {
    case expfam::FamilyKind::normal:
      return eta + std::normal_distribution<double>(0.0, std::sqrt(family.dispersion()))(rng);
    case expfam::FamilyKind::bernoulli:
      return std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng) ? 1.0 : 0.0;
    case expfam::FamilyKind::binomial: {
      const int d = family.denominator();
      const int k = std::binomial_distribution<int>(d, 1.0 / (1.0 + std::exp(-eta)))(rng);
      return static_cast<double>(k) / d;
    }
    case expfam::FamilyKind::poisson:
      return static_cast<double>(std::poisson_distribution<long>(std::exp(eta))(rng));
  }
  return 0.0;
}

void check_scenario(const SimScenario& s) {
  if (s.n < 1 || s.m < 1) throw Error(ErrorKind::invalid_input, "n and m must be >= 1");
  if (!(s.effect >= 0.0) || !(s.nuisance >= 0.0))
    throw Error(ErrorKind::invalid_input, "effect and nuisance must be >= 0");
  if (s.replicates < 1) throw Error(ErrorKind::invalid_input, "replicates must be >= 1");
  if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw Error(ErrorKind::invalid_input, "alpha must be in (0,1)");
  if (s.B < 1) throw Error(ErrorKind::invalid_input, "B must be >= 1");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

const char* to_string(Model model) noexcept {
  switch (model) {
    case Model::M1: return "M1";
    case Model::M2: return "M2";
    case Model::M3: return "M3";
    case Model::M4: return "M4";
  }
  return "?";
}

Model parse_model(const std::string& name) {
  if (name == "M1") return Model::M1;
  if (name == "M2") return Model::M2;
  if (name == "M3") return Model::M3;
  if (name == "M4") return Model::M4;
  throw Error(ErrorKind::invalid_input, "unknown model '" + name + "'");
}

std::string SimScenario::label() const {
  std::ostringstream os;
  os << to_string(model) << '/' << family.name() << " n=" << n << " m=" << m << " effect=" << effect;
  return os.str();
}

Dataset generate_dataset(const SimScenario& s, int replicate_index) {
  check_scenario(s);
  Rng rng(substream_seed(s.seed, {static_cast<std::uint64_t>(replicate_index), 0}));
  std::normal_distribution<double> normal;
  const int N = s.n * s.m;

  Dataset data;
  data.group.resize(static_cast<std::size_t>(N));
  for (int r = 0; r < N; ++r) data.group[static_cast<std::size_t>(r)] = r / s.m;

  const bool smooth = s.model == Model::M3 || s.model == Model::M4;
  data.covariate.resize(N);
  std::uniform_real_distribution<double> unif(0.0, smooth ? 2.0 : 1.0);
  for (int r = 0; r < N; ++r) data.covariate[r] = unif(rng);
  const VectorXd& x = data.covariate;

  VectorXd u0 = VectorXd::Zero(s.n), u1 = VectorXd::Zero(s.n);
  const double sd0 = std::sqrt(s.model == Model::M1 ? s.effect : s.nuisance);
  const double sd1 = std::sqrt(s.effect);
  for (int i = 0; i < s.n; ++i) {
    if (s.model != Model::M3) u0[i] = sd0 * normal(rng);
    if (s.model == Model::M2) u1[i] = sd1 * normal(rng);
  }

  VectorXd eta(N);
  for (int r = 0; r < N; ++r) {
    const int i = r / s.m;
    if (smooth)
      eta[r] = splines::true_smooth(x[r], s.effect) + u0[i];
    else
      eta[r] = s.beta0 + s.beta1 * x[r] + u0[i] + u1[i] * x[r];
  }

  data.y.resize(N);
  for (int r = 0; r < N; ++r) data.y[r] = draw_response(eta[r], s.family, rng);

  std::vector<lmm::RandomTerm> randoms;
  MatrixXd X;
  if (smooth) {
    splines::SplineBasisSpec spec = splines::spec_for(x, s.K);
    const splines::SmoothDesign sd = splines::smooth_design(x, spec);
    X = sd.X_poly;
    if (s.model == Model::M4) randoms.push_back({"group", group_indicator(s.n, s.m), MatrixXd()});
    randoms.push_back({"smooth", sd.Z_smooth, sd.D});
  } else {
    X.resize(N, 2);
    X.col(0).setOnes();
    X.col(1) = x;
    const MatrixXd Zg = group_indicator(s.n, s.m);
    randoms.push_back({"group", Zg, MatrixXd()});
    if (s.model == Model::M2) randoms.push_back({"slope", x.asDiagonal() * Zg, MatrixXd()});
  }
  data.tested_index = randoms.size() - 1;
  data.spec = pql::make_spec(s.family, lmm::LmmDesign(std::move(X), std::move(randoms)));
  return data;
}

SimTable run_scenarios(const std::vector<SimScenario>& scenarios, const RunOptions& options) {
  if (options.methods.empty()) throw Error(ErrorKind::invalid_input, "no methods requested");
  SimTable table;
  for (const auto& s : scenarios) {
    check_scenario(s);
    const auto start = std::chrono::steady_clock::now();
    std::vector<vctest::DualResult> results(static_cast<std::size_t>(s.replicates));
    std::vector<char> failed(static_cast<std::size_t>(s.replicates), 0);

    std::atomic<int> next{0}, done{0};
    std::mutex progress_mutex;
    auto worker = [&] {
      for (int r = next++; r < s.replicates; r = next++) {
        try {
          const Dataset data = generate_dataset(s, r);
          vctest::TestProblem problem;
          problem.spec = data.spec;
          problem.y = data.y;
          problem.tested_index = data.tested_index;
          problem.B = s.B;
          problem.seed = substream_seed(s.seed, {static_cast<std::uint64_t>(r), 1});
          problem.threads = 1;
          results[static_cast<std::size_t>(r)] = vctest::run_both(problem);
        } catch (const Error&) {
          failed[static_cast<std::size_t>(r)] = 1;
        }
        const int d = ++done;
        if (options.progress) {
          std::lock_guard lock(progress_mutex);
          options.progress(s, d, s.replicates);
        }
      }
    };
    const int workers = std::clamp(options.threads, 1, s.replicates);
    if (workers == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (const auto method : options.methods) {
      SimRow row;
      row.scenario = s;
      row.method = method;
      row.replicates = s.replicates;
      row.seconds = seconds;
      for (int r = 0; r < s.replicates; ++r) {
        const auto k = static_cast<std::size_t>(r);
        if (failed[k]) {
          ++row.failures;
          continue;
        }
        if (!results[k].pql_converged) ++row.nonconverged;
        const double p =
            method == vctest::Method::arlrt ? results[k].p_finite : results[k].p_mixture;
        if (p <= s.alpha) ++row.rejections;
      }
      const int ok = row.replicates - row.failures;
      if (ok > 0) {
        row.rate = static_cast<double>(row.rejections) / ok;
        row.se = std::sqrt(row.rate * (1.0 - row.rate) / ok);
      }
      table.rows.push_back(row);
    }
  }
  return table;
}

SimTable run_type1(const std::vector<SimScenario>& scenarios, const RunOptions& options) {
  for (const auto& s : scenarios)
    if (s.effect != 0.0)
      throw Error(ErrorKind::invalid_input, "type-I scenarios need effect = 0: " + s.label());
  return run_scenarios(scenarios, options);
}

SimTable run_power(std::vector<SimScenario> scenarios, const RunOptions& options) {
  if (scenarios.empty()) return {};
  const auto& a = scenarios.front();
  for (const auto& s : scenarios)
    if (s.model != a.model || s.family.kind() != a.family.kind() || s.n != a.n || s.m != a.m)
      throw Error(ErrorKind::invalid_input, "power curve scenarios must share model, family, n, m");
  std::stable_sort(scenarios.begin(), scenarios.end(),
                   [](const SimScenario& l, const SimScenario& r) { return l.effect < r.effect; });
  if (scenarios.front().effect != 0.0) {
    SimScenario anchor = scenarios.front();
    anchor.effect = 0.0;
    scenarios.insert(scenarios.begin(), anchor);
  }
  return run_scenarios(scenarios, options);
}

std::string to_csv(const SimTable& table) {
  std::ostringstream os;
  os << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    const auto& s = r.scenario;
    os << to_string(s.model) << ',' << s.family.name() << ',' << s.n << ',' << s.m << ','
       << fmt(s.effect) << ',' << vctest::to_string(r.method) << ',' << r.replicates << ','
       << r.rejections << ',' << fmt(r.rate) << ',' << fmt(r.se) << ',' << r.failures << ','
       << std::fixed << std::setprecision(3) << r.seconds << std::defaultfloat << '\n';
  }
  return os.str();
}

std::vector<MatingRecord> salamander_standin(std::uint64_t seed) {
  // Generating values match the published PQL estimates for the original data.
  const double beta[4] = {0.930, 0.283, 0.903, -1.801};  // R/R, R/W, W/W, W/R
  const char* names[4] = {"R/R", "R/W", "W/W", "W/R"};
  const double sd_f = std::sqrt(1.201), sd_m = std::sqrt(1.142);

  Rng rng(substream_seed(seed, {0}));
  std::normal_distribution<double> normal;
  VectorXd uf(60), um(60);
  for (int i = 0; i < 60; ++i) uf[i] = sd_f * normal(rng);
  for (int i = 0; i < 60; ++i) um[i] = sd_m * normal(rng);

  std::vector<MatingRecord> out;
  out.reserve(360);
  // 3 experiments x 2 closed groups; each group has 5 R and 5 W of each sex,
  // every female meets 3 R and 3 W males and vice versa.
  for (int g = 0; g < 6; ++g) {
    for (int fpop = 0; fpop < 2; ++fpop)
      for (int fi = 0; fi < 5; ++fi)
        for (int mpop = 0; mpop < 2; ++mpop)
          for (int k = 0; k < 3; ++k) {
            const int mi = (fi + k + (fpop != mpop ? 1 : 0)) % 5;
            const int female = g * 10 + fpop * 5 + fi;
            const int male = g * 10 + mpop * 5 + mi;
            const int cross = fpop == 0 ? (mpop == 0 ? 0 : 1) : (mpop == 1 ? 2 : 3);
            const double eta = beta[cross] + uf[female] + um[male];
            const bool mated = std::bernoulli_distribution(1.0 / (1.0 + std::exp(-eta)))(rng);
            out.push_back({female + 1, male + 1, names[cross], mated ? 1 : 0});
          }
  }
  return out;
}

std::vector<RichnessRecord> rikz_standin(std::uint64_t seed) {
  Rng rng(substream_seed(seed, {0}));
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> nap(-1.4, 2.3);
  std::vector<RichnessRecord> out;
  out.reserve(45);
  for (int b = 0; b < 9; ++b) {
    const double u = std::sqrt(0.492) * normal(rng);
    for (int st = 0; st < 5; ++st) {
      const double x = std::round(nap(rng) * 1000.0) / 1000.0;
      const double mu = std::exp(1.684 - 0.504 * x + u);
      const int count = static_cast<int>(std::poisson_distribution<int>(mu)(rng));
      out.push_back({b * 5 + st + 1, b + 1, x, count});
    }
  }
  return out;
}

}  // namespace vcgate::sim
