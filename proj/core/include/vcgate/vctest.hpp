#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vcgate/lmm.hpp"
#include "vcgate/nulldist.hpp"
#include "vcgate/pql.hpp"

namespace vcgate::vctest {

using Eigen::VectorXd;

enum class Method { arlrt, as_arlrt };

const char* to_string(Method method) noexcept;

/// H0: sigma2_S = 0 against sigma2_S > 0 for one random component S.
struct TestProblem {
  pql::GlmmSpec spec;
  VectorXd y;
  std::size_t tested_index = 0;
  nulldist::NullKind null_kind = nulldist::NullKind::finite_sample;
  int B = nulldist::kDefaultNullSamples;
  std::uint64_t seed = 1;
  int threads = 1;
  pql::PqlOptions pql_options;
};

struct StatisticFit {
  double statistic = 0.0;
  lmm::RemlFit null_fit;
  lmm::RemlFit alt_fit;
};

struct NullSummary {
  nulldist::NullKind kind = nulldist::NullKind::chisq_mixture;
  int B = 0;
  std::uint64_t seed = 0;
  double zero_fraction = 0.0;
  std::vector<double> eigenvalues;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  Method method = Method::arlrt;
  pql::PqlFit pql;
  lmm::RemlFit null_fit;
  lmm::RemlFit alt_fit;
  NullSummary null_distribution;
  std::vector<std::string> warnings;
};

/// Statistics below this are treated as exactly zero.
inline constexpr double kStatisticFloor = 1e-9;

/// 2 (sup_HA REL - sup_H0 REL) on a fixed working response. The null fit pins
/// the tested ratio at zero with the other components free.
StatisticFit arlrt_statistic(const pql::WorkingLmm& wlmm, std::size_t tested_index,
                             const lmm::RemlOptions& options = {},
                             const std::optional<VectorXd>& start = std::nullopt);

/// Spectrum driving the finite-sample null, with nuisance ratios plugged in
/// from the alternative fit.
std::vector<double> null_eigenvalues(const pql::WorkingLmm& wlmm, std::size_t tested_index,
                                     const lmm::RemlFit& alt_fit);

/// PQL under the alternative, working LMM, statistic, and the null of the
/// problem's kind.
TestResult run_test(const TestProblem& problem);

/// Same pipeline with the 0.5 chi2_0 : 0.5 chi2_1 null.
TestResult as_arlrt(TestProblem problem);

/// Both p-values from a single fit: the simulated null and the mixture.
struct DualResult {
  double statistic = 0.0;
  double p_finite = 1.0;
  double p_mixture = 1.0;
  bool pql_converged = true;
  double zero_fraction = 0.0;
};
DualResult run_both(const TestProblem& problem);

}  // namespace vcgate::vctest
