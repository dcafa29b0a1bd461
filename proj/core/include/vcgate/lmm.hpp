#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace vcgate::lmm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// One random-effect block u_s ~ N(0, sigma2_s * D) entering through Z.
/// An empty D means the identity.
struct RandomTerm {
  std::string name;
  MatrixXd Z;
  MatrixXd D;
};

/// Gaussian linear mixed model design with unit-scaled error covariance:
///   Var(y) = sigma2_e * (I + sum_s ratio_s * Z_s D_s Z_s').
class LmmDesign {
 public:
  LmmDesign() = default;
  LmmDesign(MatrixXd X, std::vector<RandomTerm> randoms);

  const MatrixXd& X() const noexcept { return X_; }
  const std::vector<RandomTerm>& randoms() const noexcept { return randoms_; }
  const RandomTerm& random(std::size_t s) const { return randoms_.at(s); }

  Eigen::Index n_obs() const noexcept { return X_.rows(); }
  Eigen::Index n_fixed() const noexcept { return X_.cols(); }
  std::size_t n_components() const noexcept { return randoms_.size(); }

  /// Z_s D_s^{1/2}, the factor whose outer product is Z_s D_s Z_s'.
  const MatrixXd& factor(std::size_t s) const { return factors_.at(s); }
  /// All factors side by side, in component order.
  const MatrixXd& stacked_factor() const noexcept { return stacked_; }
  Eigen::Index factor_offset(std::size_t s) const { return offsets_.at(s); }

  /// Index of the component with this name, if any.
  std::optional<std::size_t> find(const std::string& name) const;

  /// Same design with every row scaled by sqrt_w (X and all Z_s).
  LmmDesign row_scaled(const VectorXd& sqrt_w) const;

  /// Same design restricted to the listed components, in the given order.
  LmmDesign subset(const std::vector<std::size_t>& components) const;

 private:
  MatrixXd X_;
  std::vector<RandomTerm> randoms_;
  std::vector<MatrixXd> factors_;
  std::vector<MatrixXd> sqrt_D_;
  std::vector<Eigen::Index> offsets_;
  MatrixXd stacked_;

  friend class RestrictedLikelihood;
};

/// Result of a REML fit. Ratios are sigma2_s / sigma2_e.
struct RemlFit {
  VectorXd beta;
  double sigma2_e = 0.0;
  VectorXd ratios;
  double rel = 0.0;
  bool converged = true;
  std::vector<VectorXd> blups;
  int evaluations = 0;

  VectorXd variance_components() const { return ratios * sigma2_e; }
};

/// I + sum_s ratio_s Z_s D_s Z_s'.
MatrixXd build_marginal_cov(const LmmDesign& design, const VectorXd& ratios);

/// Profiled restricted log-likelihood
///   -1/2 [ log|V| + log|X'V^{-1}X| + (N-p) log(y'Py) ].
double restricted_log_lik(const LmmDesign& design, const VectorXd& y,
                          const VectorXd& ratios);

/// Cached cross-products of (design, y) for repeated REL evaluation.
///
/// Evaluation works on the augmented Henderson system built from
/// [G X r]'[G X r], where G stacks the factors and r is y with its OLS fit on
/// X removed (REL is invariant to that shift). Each evaluation is a single
/// Cholesky of size q + p + 1, independent of N.
class RestrictedLikelihood {
 public:
  struct Solution {
    double rel = 0.0;
    double ypy = 0.0;
    VectorXd beta;
    std::vector<VectorXd> blups;
  };

  /// With `fixed_scale` the residual variance is held at that value instead
  /// of being profiled out:
  ///   -1/2 [ log|V| + log|X'V^{-1}X| + y'Py / s + (N-p) log s ].
  RestrictedLikelihood(const LmmDesign& design, const VectorXd& y,
                       std::optional<double> fixed_scale = std::nullopt);

  double operator()(const VectorXd& ratios) const;
  Solution solve(const VectorXd& ratios) const;

  const LmmDesign& design() const noexcept { return *design_; }
  Eigen::Index residual_df() const noexcept { return design_->n_obs() - design_->n_fixed(); }

  /// Largest eigenvalue of Z_s' (I - H) Z_s, a natural scale for ratio_s.
  double component_scale(std::size_t s) const;

 private:
  struct Factorized;
  Factorized factorize(const VectorXd& ratios) const;
  double objective(double log_det, double ypy) const;

  const LmmDesign* design_;
  VectorXd beta_ols_;
  MatrixXd cross_;        // [G X r]'[G X r]
  double log_det_xtx_ = 0.0;
  std::optional<double> fixed_scale_;
  Eigen::Index q_ = 0;
  Eigen::Index p_ = 0;
};

struct RemlOptions {
  double rel_tolerance = 1e-8;
  int max_evaluations = 200;
  /// Boundary is preferred when it is within this much REL of an interior optimum.
  double boundary_slack = 1e-10;
  /// Hold sigma2_e at this value rather than profiling it out.
  std::optional<double> fixed_scale;
};

/// Maximize REL over ratios >= 0 for the components flagged in `active`;
/// inactive components are pinned at `fixed_ratios`. `start`, when given,
/// seeds the multi-component search.
RemlFit fit_reml(const LmmDesign& design, const VectorXd& y,
                 const std::vector<bool>& active, const VectorXd& fixed_ratios,
                 const RemlOptions& options = {},
                 const std::optional<VectorXd>& start = std::nullopt);

/// All components active, starting from zero pins.
RemlFit fit_reml(const LmmDesign& design, const VectorXd& y,
                 const RemlOptions& options = {});

/// sum_s Z_s b_s.
VectorXd random_predictor(const LmmDesign& design, const std::vector<VectorXd>& blups);

}  // namespace vcgate::lmm
