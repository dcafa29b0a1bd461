#pragma once

#include <Eigen/Dense>

namespace vcgate::splines {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KnotPlacement {
  /// Equidistant knots continued past both ends of the domain. The Greville
  /// abscissae are then equally spaced, so index-linear coefficients give
  /// t-linear curves.
  extended,
  /// Equidistant interior knots with (degree + 1)-fold boundary knots.
  clamped,
};

struct SplineBasisSpec {
  int K = 30;
  int degree = 3;
  double t_min = 0.0;
  double t_max = 1.0;
  KnotPlacement knots = KnotPlacement::extended;
};

/// Spec whose domain is [min t, max t].
SplineBasisSpec spec_for(const VectorXd& t, int K = 30);

/// Full knot vector (K + degree + 1 entries).
VectorXd knot_vector(const SplineBasisSpec& spec);

/// N x K B-spline basis; rows sum to one on the domain.
MatrixXd bspline_design(const VectorXd& t, const SplineBasisSpec& spec);

struct DifferencePenalty {
  MatrixXd delta;    // (K - 2) x K second differences
  MatrixXd penalty;  // delta' delta
};

DifferencePenalty difference_penalty(int K, int order = 2);

/// Mixed-model form of a penalized spline: B delta = X_poly beta + Z_smooth u
/// with u ~ N(0, sigma2 I_{K-2}).
struct SmoothDesign {
  MatrixXd X_poly;
  MatrixXd Z_smooth;
  MatrixXd D;
};

SmoothDesign mixed_model_reparam(const MatrixXd& B, const DifferencePenalty& penalty,
                                 const VectorXd& t);

/// Convenience: basis, penalty and reparameterization in one call.
SmoothDesign smooth_design(const VectorXd& t, const SplineBasisSpec& spec);

/// f(t) = 0.5 - t + 0.25 delta t exp(2 - 2t).
double true_smooth(double t, double delta) noexcept;

}  // namespace vcgate::splines
