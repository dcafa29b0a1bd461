#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vcgate/expfam.hpp"
#include "vcgate/pql.hpp"
#include "vcgate/vctest.hpp"

namespace vcgate::sim {

using Eigen::VectorXd;

/// Generating models: random intercept (M1), random slope with a nuisance
/// intercept (M2), smooth f(t) (M3), smooth with a nuisance intercept (M4).
enum class Model { M1, M2, M3, M4 };

const char* to_string(Model model) noexcept;
Model parse_model(const std::string& name);

struct SimScenario {
  Model model = Model::M1;
  expfam::Family family = expfam::Family::normal();
  int n = 10;
  int m = 20;
  /// sigma2_0 for M1, sigma2_1 for M2, delta for M3/M4.
  double effect = 0.0;
  /// Variance of the nuisance random intercept (M2, M4).
  double nuisance = 1.0;
  double beta0 = 0.0;
  double beta1 = 1.0;
  int replicates = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int B = 2000;
  int K = 30;

  std::string label() const;
};

struct Dataset {
  VectorXd y;
  pql::GlmmSpec spec;
  std::size_t tested_index = 0;
  VectorXd covariate;
  std::vector<int> group;
};

/// Deterministic in (scenario.seed, replicate_index).
Dataset generate_dataset(const SimScenario& scenario, int replicate_index);

struct SimRow {
  SimScenario scenario;
  vctest::Method method = vctest::Method::arlrt;
  int replicates = 0;
  int rejections = 0;
  double rate = 0.0;
  double se = 0.0;
  int failures = 0;
  int nonconverged = 0;
  double seconds = 0.0;
};

struct SimTable {
  std::vector<SimRow> rows;
};

using Progress = std::function<void(const SimScenario&, int done, int total)>;

struct RunOptions {
  std::vector<vctest::Method> methods{vctest::Method::arlrt, vctest::Method::as_arlrt};
  int threads = 1;
  Progress progress;
};

/// One row per (scenario, method), rates at each scenario's alpha.
SimTable run_scenarios(const std::vector<SimScenario>& scenarios, const RunOptions& options);

/// Requires effect = 0 in every scenario.
SimTable run_type1(const std::vector<SimScenario>& scenarios, const RunOptions& options);

/// Scenarios must share (model, family, n, m); rows come out ordered by
/// effect and an effect = 0 anchor is added when missing.
SimTable run_power(std::vector<SimScenario> scenarios, const RunOptions& options);

inline constexpr const char* kCsvHeader =
    "model,family,n,m,effect,method,replicates,rejections,rate,se,failures,seconds";

std::string to_csv(const SimTable& table);

// Synthetic stand-ins for the two application datasets, with the published
// layouts: a crossed female/male mating design (360 binary outcomes, 60
// females, 60 males, four population crosses) and a 9 beach x 5 station
// Poisson richness survey.
struct MatingRecord {
  int female;
  int male;
  std::string cross;
  int mated;
};
std::vector<MatingRecord> salamander_standin(std::uint64_t seed = 20170601);

struct RichnessRecord {
  int sample;
  int beach;
  double nap;
  int richness;
};
std::vector<RichnessRecord> rikz_standin(std::uint64_t seed = 20090101);

}  // namespace vcgate::sim
