#include "vcgate/splines.hpp"

#include <cmath>
#include <string>

#include "vcgate/errors.hpp"

namespace vcgate::splines {

namespace {

void check_spec(const SplineBasisSpec& spec) {
  if (spec.degree < 1) throw Error(ErrorKind::design, "spline degree must be >= 1");
  if (spec.K < spec.degree + 2)
    throw Error(ErrorKind::design, "basis dimension " + std::to_string(spec.K) + " is below degree + 2");
  if (!(spec.t_max > spec.t_min)) throw Error(ErrorKind::design, "spline domain is empty");
}

}  // namespace

SplineBasisSpec spec_for(const VectorXd& t, int K) {
  if (t.size() == 0) throw Error(ErrorKind::design, "no covariate values");
  SplineBasisSpec spec;
  spec.K = K;
  spec.t_min = t.minCoeff();
  spec.t_max = t.maxCoeff();
  return spec;
}

VectorXd knot_vector(const SplineBasisSpec& spec) {
  check_spec(spec);
  const int d = spec.degree;
  const int n_knots = spec.K + d + 1;
  VectorXd knots(n_knots);
  if (spec.knots == KnotPlacement::extended) {
    // K - d intervals across the domain, d extra knots on either side.
    const double h = (spec.t_max - spec.t_min) / (spec.K - d);
    for (int i = 0; i < n_knots; ++i) knots[i] = spec.t_min + h * (i - d);
  } else {
    const int intervals = spec.K - d;
    const double h = (spec.t_max - spec.t_min) / intervals;
    for (int i = 0; i < n_knots; ++i) {
      if (i <= d) knots[i] = spec.t_min;
      else if (i >= spec.K) knots[i] = spec.t_max;
      else knots[i] = spec.t_min + h * (i - d);
    }
  }
  return knots;
}

MatrixXd bspline_design(const VectorXd& t, const SplineBasisSpec& spec) {
  const VectorXd knots = knot_vector(spec);
  const int d = spec.degree;
  const int K = spec.K;
  MatrixXd B = MatrixXd::Zero(t.size(), K);
  VectorXd left(d + 1), right(d + 1), N(d + 1);
  for (Eigen::Index r = 0; r < t.size(); ++r) {
    const double x = t[r];
    if (!(x >= spec.t_min && x <= spec.t_max))
      throw Error(ErrorKind::domain, "covariate value " + std::to_string(x) + " at row " +
                                         std::to_string(r) + " is outside the spline domain");
    // Knot span: knots[span] <= x < knots[span + 1], with the right end
    // folded into the last interval of the domain.
    int span = d;
    while (span < K - 1 && x >= knots[span + 1]) ++span;

    // Triangular de Boor table for the d + 1 non-zero basis functions.
    N[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
      left[j] = x - knots[span + 1 - j];
      right[j] = knots[span + j] - x;
      double saved = 0.0;
      for (int k = 0; k < j; ++k) {
        const double temp = N[k] / (right[k + 1] + left[j - k]);
        N[k] = saved + right[k + 1] * temp;
        saved = left[j - k] * temp;
      }
      N[j] = saved;
    }
    for (int k = 0; k <= d; ++k) B(r, span - d + k) = N[k];
  }
  return B;
}

DifferencePenalty difference_penalty(int K, int order) {
  if (order != 2) throw Error(ErrorKind::design, "only second-order difference penalties are supported");
  if (K < 4) throw Error(ErrorKind::design, "difference penalty needs K >= 4");
  DifferencePenalty out;
  out.delta = MatrixXd::Zero(K - 2, K);
  for (int i = 0; i < K - 2; ++i) {
    out.delta(i, i) = 1.0;
    out.delta(i, i + 1) = -2.0;
    out.delta(i, i + 2) = 1.0;
  }
  out.penalty = out.delta.transpose() * out.delta;
  return out;
}

SmoothDesign mixed_model_reparam(const MatrixXd& B, const DifferencePenalty& penalty, const VectorXd& t) {
  const MatrixXd& delta = penalty.delta;
  if (B.cols() != delta.cols()) throw Error(ErrorKind::design, "basis and penalty sizes differ");
  if (B.rows() != t.size()) throw Error(ErrorKind::design, "basis and covariate lengths differ");

  SmoothDesign out;
  out.X_poly.resize(t.size(), 2);
  out.X_poly.col(0).setOnes();
  out.X_poly.col(1) = t;

  const MatrixXd ddt = delta * delta.transpose();
  const Eigen::LLT<MatrixXd> llt(ddt);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::design, "difference operator is rank deficient");
  // B Delta' (Delta Delta')^{-1}
  out.Z_smooth = B * llt.solve(delta).transpose();
  out.D = MatrixXd::Identity(out.Z_smooth.cols(), out.Z_smooth.cols());

  Eigen::ColPivHouseholderQR<MatrixXd> qr(out.X_poly);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw Error(ErrorKind::design, "covariate is constant; linear basis is rank deficient");
  const MatrixXd resid = out.Z_smooth - out.X_poly * qr.solve(out.Z_smooth);
  for (Eigen::Index j = 0; j < resid.cols(); ++j)
    if (resid.col(j).norm() <= 1e-10 * std::max(1.0, out.Z_smooth.col(j).norm()))
      throw Error(ErrorKind::design, "smooth basis column " + std::to_string(j) + " is linear in t");
  return out;
}

SmoothDesign smooth_design(const VectorXd& t, const SplineBasisSpec& spec) {
  return mixed_model_reparam(bspline_design(t, spec), difference_penalty(spec.K), t);
}

double true_smooth(double t, double delta) noexcept {
  return 0.5 - t + 0.25 * delta * t * std::exp(2.0 - 2.0 * t);
}

}  // namespace vcgate::splines
