#include "vcgate/vctest.hpp"

#include <algorithm>

#include "vcgate/errors.hpp"

namespace vcgate::vctest {

namespace {

void validate(const TestProblem& problem) {
  if (problem.tested_index >= problem.spec.design.n_components())
    throw Error(ErrorKind::invalid_input, "tested component index " +
                                              std::to_string(problem.tested_index) + " is out of range");
  if (problem.null_kind == nulldist::NullKind::finite_sample && problem.B < 1)
    throw Error(ErrorKind::invalid_input, "null sample count must be >= 1");
}

struct Pipeline {
  pql::PqlFit pql;
  StatisticFit stat;
  std::vector<double> eigenvalues;
  std::vector<std::string> warnings;
};

Pipeline run_pipeline(const TestProblem& problem, bool want_eigenvalues) {
  validate(problem);
  Pipeline out;
  out.pql = pql::fit_pql(problem.spec, problem.y, problem.pql_options);
  if (!out.pql.converged)
    out.warnings.push_back("PQL did not converge in " + std::to_string(out.pql.iterations) + " iterations");
  if (out.pql.clamped > 0)
    out.warnings.push_back(std::to_string(out.pql.clamped) + " linear predictor values clamped");

  const pql::WorkingLmm wlmm = pql::build_working_lmm(out.pql, problem.spec, problem.y);
  out.stat = arlrt_statistic(wlmm, problem.tested_index, problem.pql_options.reml, out.pql.ratios);
  if (!out.stat.alt_fit.converged) out.warnings.push_back("alternative REML fit did not converge");
  if (!out.stat.null_fit.converged) out.warnings.push_back("null REML fit did not converge");
  if (want_eigenvalues) out.eigenvalues = null_eigenvalues(wlmm, problem.tested_index, out.stat.alt_fit);
  return out;
}

}  // namespace

const char* to_string(Method method) noexcept {
  return method == Method::arlrt ? "aRLRT" : "as-aRLRT";
}

StatisticFit arlrt_statistic(const pql::WorkingLmm& wlmm, std::size_t tested_index,
                             const lmm::RemlOptions& options, const std::optional<VectorXd>& start) {
  const auto& design = wlmm.design_tilde;
  const std::size_t S = design.n_components();
  if (tested_index >= S) throw Error(ErrorKind::invalid_input, "tested component index out of range");
  const VectorXd zeros = VectorXd::Zero(static_cast<Eigen::Index>(S));

  std::vector<bool> null_active(S, true);
  null_active[tested_index] = false;
  StatisticFit out;
  out.null_fit = lmm::fit_reml(design, wlmm.y_tilde, null_active, zeros, options, start);
  out.alt_fit = lmm::fit_reml(design, wlmm.y_tilde, std::vector<bool>(S, true), zeros, options, start);

  // The null model is a face of the alternative's parameter space.
  if (out.alt_fit.rel < out.null_fit.rel) out.alt_fit = out.null_fit;

  const double diff = 2.0 * (out.alt_fit.rel - out.null_fit.rel);
  out.statistic = (out.alt_fit.ratios[tested_index] == 0.0 || diff < kStatisticFloor) ? 0.0 : diff;
  return out;
}

std::vector<double> null_eigenvalues(const pql::WorkingLmm& wlmm, std::size_t tested_index,
                                     const lmm::RemlFit& alt_fit) {
  return nulldist::whitened_eigenvalues(wlmm.design_tilde, tested_index, alt_fit.ratios);
}

TestResult run_test(const TestProblem& problem) {
  const bool finite = problem.null_kind == nulldist::NullKind::finite_sample;
  Pipeline pipe = run_pipeline(problem, finite);

  TestResult result;
  result.statistic = pipe.stat.statistic;
  result.pql = std::move(pipe.pql);
  result.null_fit = std::move(pipe.stat.null_fit);
  result.alt_fit = std::move(pipe.stat.alt_fit);
  result.warnings = std::move(pipe.warnings);
  result.null_distribution.kind = problem.null_kind;

  if (finite) {
    const auto& design = problem.spec.design;
    const auto null = nulldist::make_finite_null(pipe.eigenvalues, design.n_obs(), design.n_fixed(),
                                                 problem.B, problem.seed, problem.threads);
    result.method = Method::arlrt;
    result.p_value = nulldist::empirical_pvalue(result.statistic, null);
    result.null_distribution.B = problem.B;
    result.null_distribution.seed = problem.seed;
    result.null_distribution.zero_fraction = null.zero_fraction();
    result.null_distribution.eigenvalues = std::move(pipe.eigenvalues);
  } else {
    result.method = Method::as_arlrt;
    result.p_value = nulldist::mixture_pvalue(result.statistic);
    result.null_distribution.zero_fraction = 0.5;
  }
  return result;
}

TestResult as_arlrt(TestProblem problem) {
  problem.null_kind = nulldist::NullKind::chisq_mixture;
  return run_test(problem);
}

DualResult run_both(const TestProblem& problem) {
  Pipeline pipe = run_pipeline(problem, true);
  const auto& design = problem.spec.design;
  DualResult out;
  out.statistic = pipe.stat.statistic;
  out.pql_converged = pipe.pql.converged;
  out.p_mixture = nulldist::mixture_pvalue(out.statistic);
  if (out.statistic == 0.0) {
    // Every simulated value is >= 0, so the add-one p-value is exactly 1.
    out.p_finite = 1.0;
    return out;
  }
  const auto null = nulldist::make_finite_null(pipe.eigenvalues, design.n_obs(), design.n_fixed(),
                                               problem.B, problem.seed, problem.threads);
  out.p_finite = nulldist::empirical_pvalue(out.statistic, null);
  out.zero_fraction = null.zero_fraction();
  return out;
}

}  // namespace vcgate::vctest
