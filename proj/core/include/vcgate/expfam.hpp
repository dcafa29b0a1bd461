#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>

namespace vcgate::expfam {

enum class FamilyKind { normal, bernoulli, binomial, poisson };
enum class LinkKind { identity, logit, log };

/// Response distribution. Binomial responses are proportions in [0, 1] with
/// `denominator` trials per observation; only Normal carries a free dispersion.
class Family {
 public:
  static Family normal(double dispersion = 1.0);
  static Family bernoulli();
  static Family binomial(int denominator);
  static Family poisson();

  FamilyKind kind() const noexcept { return kind_; }
  int denominator() const noexcept { return denominator_; }
  double dispersion() const noexcept { return dispersion_; }

  /// Copy with a new dispersion; only meaningful for Normal.
  Family with_dispersion(double dispersion) const;

  std::string name() const;

 private:
  Family(FamilyKind kind, int denominator, double dispersion)
      : kind_(kind), denominator_(denominator), dispersion_(dispersion) {}

  FamilyKind kind_;
  int denominator_;
  double dispersion_;
};

struct Link {
  LinkKind kind = LinkKind::identity;
};

Link canonical_link(const Family& family) noexcept;
Family parse_family(std::string_view name, int denominator = 1);
std::string to_string(LinkKind kind);

double link_apply(Link link, double mu);
double link_inverse(Link link, double eta);
double link_derivative(Link link, double mu);
double variance_function(const Family& family, double mu);

// Vector forms report the offending index in their error messages.
Eigen::VectorXd link_apply(Link link, const Eigen::VectorXd& mu);
Eigen::VectorXd link_inverse(Link link, const Eigen::VectorXd& eta);

/// Linear-predictor bounds that keep the mean strictly inside its domain.
double eta_clamp_bound(Link link) noexcept;

}  // namespace vcgate::expfam
