#pragma once

#include <Eigen/Dense>
#include <vector>

#include "vcgate/expfam.hpp"
#include "vcgate/lmm.hpp"

namespace vcgate::pql {

using Eigen::VectorXd;

/// Generalized linear mixed model: g(E[y | u]) = X beta + sum_s Z_s u_s.
struct GlmmSpec {
  expfam::Family family = expfam::Family::normal();
  expfam::Link link;
  lmm::LmmDesign design;
};

/// Builds a spec with the canonical link for `family`.
GlmmSpec make_spec(expfam::Family family, lmm::LmmDesign design);

struct PqlOptions {
  double tolerance = 1e-6;
  int max_iterations = 50;
  int glm_max_iterations = 50;
  lmm::RemlOptions reml;
};

/// Converged PQL state under the model with every component free.
struct PqlFit {
  VectorXd eta_star;
  VectorXd mu_star;
  VectorXd w_star;
  VectorXd beta;
  /// Ratios and residual variance of the last working-LMM fit, on the scale
  /// of the standardized working response.
  VectorXd ratios;
  double sigma2_e = 1.0;
  /// Normal dispersion used for the final weights; 1 for the other families.
  double dispersion = 1.0;
  std::vector<VectorXd> blups;
  int iterations = 0;
  bool converged = false;
  /// Observations whose linear predictor hit the clamp at convergence.
  int clamped = 0;

  /// sigma2_s on the linear-predictor scale.
  VectorXd variance_components() const { return ratios * sigma2_e; }
};

/// Standardized working model: y_tilde = X_tilde beta + sum Z_tilde_s u_s + e.
struct WorkingLmm {
  VectorXd y_tilde;
  lmm::LmmDesign design_tilde;
};

struct GlmFit {
  VectorXd beta;
  VectorXd eta;
  int iterations = 0;
  bool converged = false;
};

/// Clamp eta to the link's safe range; counts clamped entries when asked.
VectorXd clamp_eta(const VectorXd& eta, expfam::Link link, int* clamped = nullptr);

/// w_i = 1 / (g'(mu_i)^2 v(mu_i)) at mu = g^{-1}(clamp(eta)).
VectorXd compute_weights(const VectorXd& eta, const expfam::Family& family, expfam::Link link);

/// y_tilde_i = sqrt(w_i) (eta_i + g'(mu_i)(y_i - mu_i)).
VectorXd working_response(const VectorXd& y, const VectorXd& eta,
                          const expfam::Family& family, expfam::Link link);

/// Rejects responses outside the family's support and constant responses.
void validate_response(const VectorXd& y, const expfam::Family& family);

/// Unpenalized IRLS fit with random effects set to zero.
GlmFit fit_glm(const Eigen::MatrixXd& X, const VectorXd& y, const expfam::Family& family,
               expfam::Link link, int max_iterations = 50);

PqlFit fit_pql(const GlmmSpec& spec, const VectorXd& y, const PqlOptions& options = {});

/// Working LMM at the fit's (eta*, mu*, W*), which are held fixed from here on.
WorkingLmm build_working_lmm(const PqlFit& fit, const GlmmSpec& spec, const VectorXd& y);

}  // namespace vcgate::pql
