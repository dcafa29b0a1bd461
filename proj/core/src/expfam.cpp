#include "vcgate/expfam.hpp"

#include <cmath>
#include <limits>

#include "vcgate/errors.hpp"

namespace vcgate::expfam {

namespace {

std::string at_index(Eigen::Index i) {
  return " at index " + std::to_string(i);
}

void check_mean(Link link, double mu, ErrorKind kind, const std::string& where) {
  bool ok = std::isfinite(mu);
  if (ok && link.kind == LinkKind::logit) ok = mu > 0.0 && mu < 1.0;
  if (ok && link.kind == LinkKind::log) ok = mu > 0.0;
  if (!ok) {
    throw Error(kind, "mean " + std::to_string(mu) + " outside the open domain of the " +
                          to_string(link.kind) + " link" + where);
  }
}

}  // namespace

Family Family::normal(double dispersion) {
  if (!(dispersion > 0.0) || !std::isfinite(dispersion))
    throw Error(ErrorKind::invalid_input, "normal dispersion must be positive");
  return Family(FamilyKind::normal, 0, dispersion);
}

Family Family::bernoulli() { return Family(FamilyKind::bernoulli, 1, 1.0); }

Family Family::binomial(int denominator) {
  if (denominator < 1)
    throw Error(ErrorKind::invalid_input, "binomial denominator must be >= 1");
  return Family(FamilyKind::binomial, denominator, 1.0);
}

Family Family::poisson() { return Family(FamilyKind::poisson, 0, 1.0); }

Family Family::with_dispersion(double dispersion) const {
  if (kind_ != FamilyKind::normal) return *this;
  return normal(dispersion);
}

std::string Family::name() const {
  switch (kind_) {
    case FamilyKind::normal: return "normal";
    case FamilyKind::bernoulli: return "bernoulli";
    case FamilyKind::binomial: return "binomial";
    case FamilyKind::poisson: return "poisson";
  }
  return "unknown";
}

Link canonical_link(const Family& family) noexcept {
  switch (family.kind()) {
    case FamilyKind::normal: return {LinkKind::identity};
    case FamilyKind::bernoulli:
    case FamilyKind::binomial: return {LinkKind::logit};
    case FamilyKind::poisson: return {LinkKind::log};
  }
  return {LinkKind::identity};
}

Family parse_family(std::string_view name, int denominator) {
  if (name == "normal" || name == "gaussian") return Family::normal();
  if (name == "bernoulli") return Family::bernoulli();
  if (name == "binomial") return Family::binomial(denominator);
  if (name == "poisson") return Family::poisson();
  throw Error(ErrorKind::invalid_input, "unknown family '" + std::string(name) + "'");
}

std::string to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::identity: return "identity";
    case LinkKind::logit: return "logit";
    case LinkKind::log: return "log";
  }
  return "unknown";
}

double link_apply(Link link, double mu) {
  check_mean(link, mu, ErrorKind::invalid_mean, "");
  switch (link.kind) {
    case LinkKind::identity: return mu;
    case LinkKind::logit: return std::log(mu) - std::log1p(-mu);
    case LinkKind::log: return std::log(mu);
  }
  return mu;
}

double link_inverse(Link link, double eta) {
  if (!std::isfinite(eta))
    throw Error(ErrorKind::invalid_input, "non-finite linear predictor");
  switch (link.kind) {
    case LinkKind::identity: return eta;
    case LinkKind::logit:
      // Split by sign so exp never overflows.
      if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
      else {
        const double e = std::exp(eta);
        return e / (1.0 + e);
      }
    case LinkKind::log: return std::exp(eta);
  }
  return eta;
}

double link_derivative(Link link, double mu) {
  check_mean(link, mu, ErrorKind::singular_weight, "");
  switch (link.kind) {
    case LinkKind::identity: return 1.0;
    case LinkKind::logit: return 1.0 / (mu * (1.0 - mu));
    case LinkKind::log: return 1.0 / mu;
  }
  return 1.0;
}

double variance_function(const Family& family, double mu) {
  check_mean(canonical_link(family), mu, ErrorKind::singular_weight, "");
  switch (family.kind()) {
    case FamilyKind::normal: return family.dispersion();
    case FamilyKind::bernoulli: return mu * (1.0 - mu);
    case FamilyKind::binomial: return mu * (1.0 - mu) / family.denominator();
    case FamilyKind::poisson: return mu;
  }
  return 1.0;
}

Eigen::VectorXd link_apply(Link link, const Eigen::VectorXd& mu) {
  Eigen::VectorXd eta(mu.size());
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    check_mean(link, mu[i], ErrorKind::invalid_mean, at_index(i));
    eta[i] = link_apply(link, mu[i]);
  }
  return eta;
}

Eigen::VectorXd link_inverse(Link link, const Eigen::VectorXd& eta) {
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    if (!std::isfinite(eta[i]))
      throw Error(ErrorKind::invalid_input, "non-finite linear predictor" + at_index(i));
    mu[i] = link_inverse(link, eta[i]);
  }
  return mu;
}

double eta_clamp_bound(Link link) noexcept {
  switch (link.kind) {
    case LinkKind::identity: return std::numeric_limits<double>::infinity();
    case LinkKind::logit: return 15.0;
    case LinkKind::log: return 30.0;
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace vcgate::expfam
