#include "vcgate/pql.hpp"

#include <algorithm>
#include <cmath>

#include "vcgate/errors.hpp"

namespace vcgate::pql {

using expfam::Family;
using expfam::FamilyKind;
using expfam::Link;

namespace {

double max_relative_change(const VectorXd& now, const VectorXd& before) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < now.size(); ++i)
    worst = std::max(worst, std::abs(now[i] - before[i]) / (std::abs(before[i]) + 1e-4));
  return worst;
}

bool is_integer(double v) { return std::abs(v - std::round(v)) <= 1e-8 * std::max(1.0, std::abs(v)); }

}  // namespace

GlmmSpec make_spec(Family family, lmm::LmmDesign design) {
  GlmmSpec spec{family, expfam::canonical_link(family), std::move(design)};
  return spec;
}

VectorXd clamp_eta(const VectorXd& eta, Link link, int* clamped) {
  const double bound = expfam::eta_clamp_bound(link);
  VectorXd out(eta.size());
  int count = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!std::isfinite(eta[i]))
      throw Error(ErrorKind::invalid_input, "non-finite linear predictor at index " + std::to_string(i));
    out[i] = std::clamp(eta[i], -bound, bound);
    if (out[i] != eta[i]) ++count;
  }
  if (clamped) *clamped = count;
  return out;
}

VectorXd compute_weights(const VectorXd& eta, const Family& family, Link link) {
  const VectorXd e = clamp_eta(eta, link);
  VectorXd w(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double mu = expfam::link_inverse(link, e[i]);
    const double d = expfam::link_derivative(link, mu);
    w[i] = 1.0 / (d * d * expfam::variance_function(family, mu));
  }
  return w;
}

VectorXd working_response(const VectorXd& y, const VectorXd& eta, const Family& family, Link link) {
  if (y.size() != eta.size())
    throw Error(ErrorKind::invalid_input, "response and linear predictor lengths differ");
  const VectorXd e = clamp_eta(eta, link);
  VectorXd out(e.size());
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double mu = expfam::link_inverse(link, e[i]);
    const double d = expfam::link_derivative(link, mu);
    const double w = 1.0 / (d * d * expfam::variance_function(family, mu));
    // Under the identity link the working variate is y itself.
    const double z = link.kind == expfam::LinkKind::identity ? y[i] : e[i] + d * (y[i] - mu);
    out[i] = std::sqrt(w) * z;
  }
  return out;
}

void validate_response(const VectorXd& y, const Family& family) {
  if (y.size() == 0) throw Error(ErrorKind::invalid_input, "empty response");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double v = y[i];
    const std::string where = " at index " + std::to_string(i);
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_input, "non-finite response" + where);
    switch (family.kind()) {
      case FamilyKind::normal: break;
      case FamilyKind::bernoulli:
        if (v != 0.0 && v != 1.0)
          throw Error(ErrorKind::invalid_input, "bernoulli response must be 0 or 1" + where);
        break;
      case FamilyKind::binomial:
        if (v < 0.0 || v > 1.0 || !is_integer(v * family.denominator()))
          throw Error(ErrorKind::invalid_input,
                      "binomial response must be successes/" + std::to_string(family.denominator()) + where);
        break;
      case FamilyKind::poisson:
        if (v < 0.0 || !is_integer(v))
          throw Error(ErrorKind::invalid_input, "poisson response must be a non-negative integer" + where);
        break;
    }
  }
  if (y.maxCoeff() == y.minCoeff())
    throw Error(ErrorKind::degenerate_data, "response is constant");
}

GlmFit fit_glm(const Eigen::MatrixXd& X, const VectorXd& y, const Family& family, Link link,
               int max_iterations) {
  // Start from the mean-shifted response, which is interior for every family
  // once y is non-constant.
  const VectorXd mu0 = (y.array() + y.mean()) / 2.0;
  VectorXd eta = clamp_eta(expfam::link_apply(link, mu0), link);
  GlmFit out;
  out.beta = VectorXd::Zero(X.cols());
  for (int it = 1; it <= max_iterations; ++it) {
    VectorXd z(eta.size()), sw(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double mu = expfam::link_inverse(link, eta[i]);
      const double d = expfam::link_derivative(link, mu);
      sw[i] = std::sqrt(1.0 / (d * d * expfam::variance_function(family, mu)));
      z[i] = eta[i] + d * (y[i] - mu);
    }
    const VectorXd beta = (sw.asDiagonal() * X).colPivHouseholderQr().solve(sw.cwiseProduct(z));
    const double change = it == 1 ? 1.0 : max_relative_change(beta, out.beta);
    out.beta = beta;
    eta = clamp_eta(X * beta, link);
    out.iterations = it;
    if (link.kind == expfam::LinkKind::identity || change < 1e-10) {
      out.converged = true;
      break;
    }
  }
  out.eta = eta;
  return out;
}

PqlFit fit_pql(const GlmmSpec& spec, const VectorXd& y, const PqlOptions& options) {
  if (expfam::canonical_link(spec.family).kind != spec.link.kind)
    throw Error(ErrorKind::invalid_input, "link is not canonical for the " + spec.family.name() + " family");
  const auto& design = spec.design;
  if (y.size() != design.n_obs())
    throw Error(ErrorKind::design, "response length does not match the design");
  validate_response(y, spec.family);

  const std::size_t S = design.n_components();
  const GlmFit glm = fit_glm(design.X(), y, spec.family, spec.link, options.glm_max_iterations);

  Family family = spec.family;
  VectorXd eta = glm.eta;
  VectorXd beta = glm.beta;
  VectorXd ratios = VectorXd::Zero(static_cast<Eigen::Index>(S));
  double dispersion = family.dispersion();

  // Counts and binary responses carry no free dispersion, so the working
  // residual variance is held at one.
  lmm::RemlOptions reml_options = options.reml;
  if (family.kind() != FamilyKind::normal) reml_options.fixed_scale = 1.0;

  PqlFit fit;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const VectorXd w = compute_weights(eta, family, spec.link);
    const VectorXd sw = w.cwiseSqrt();
    const VectorXd y_tilde = working_response(y, eta, family, spec.link);
    const lmm::LmmDesign wdesign = design.row_scaled(sw);

    const std::optional<VectorXd> start =
        it == 1 ? std::nullopt : std::optional<VectorXd>(ratios);
    const lmm::RemlFit reml = lmm::fit_reml(wdesign, y_tilde, std::vector<bool>(S, true),
                                            VectorXd::Zero(static_cast<Eigen::Index>(S)),
                                            reml_options, start);

    double change = std::max(max_relative_change(reml.beta, beta),
                             S > 0 ? max_relative_change(reml.ratios, ratios) : 0.0);
    if (family.kind() == FamilyKind::normal) {
      // The working residual variance becomes the new dispersion so the next
      // working response is standardized.
      const double next = dispersion * reml.sigma2_e;
      change = std::max(change, std::abs(next - dispersion) / dispersion);
      dispersion = next;
    }

    beta = reml.beta;
    ratios = reml.ratios;
    eta = design.X() * beta + lmm::random_predictor(design, reml.blups);
    if (!eta.allFinite())
      throw Error(ErrorKind::non_convergence, "PQL linear predictor diverged at iteration " + std::to_string(it));

    fit.sigma2_e = reml.sigma2_e;
    fit.blups = reml.blups;
    fit.iterations = it;
    if (family.kind() == FamilyKind::normal) family = family.with_dispersion(dispersion);
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.eta_star = clamp_eta(eta, spec.link, &fit.clamped);
  fit.mu_star = expfam::link_inverse(spec.link, fit.eta_star);
  fit.w_star = compute_weights(fit.eta_star, family, spec.link);
  fit.beta = beta;
  fit.ratios = ratios;
  fit.dispersion = dispersion;
  return fit;
}

WorkingLmm build_working_lmm(const PqlFit& fit, const GlmmSpec& spec, const VectorXd& y) {
  const Family family = spec.family.with_dispersion(fit.dispersion);
  const VectorXd w = compute_weights(fit.eta_star, family, spec.link);
  return {working_response(y, fit.eta_star, family, spec.link), spec.design.row_scaled(w.cwiseSqrt())};
}

}  // namespace vcgate::pql
