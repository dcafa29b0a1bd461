#include "vcgate/lmm.hpp"

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "vcgate/errors.hpp"

namespace vcgate::lmm {

namespace {

constexpr double kEigenClip = 1e-10;

MatrixXd symmetric_sqrt(const MatrixXd& D, const std::string& name) {
  if ((D - D.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, D.cwiseAbs().maxCoeff()))
    throw Error(ErrorKind::design, "structure matrix of '" + name + "' is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(D);
  VectorXd ev = eig.eigenvalues();
  const double top = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -kEigenClip * top)
      throw Error(ErrorKind::design, "structure matrix of '" + name + "' is not positive semi-definite");
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

void check_ratios(const LmmDesign& design, const VectorXd& ratios) {
  if (static_cast<std::size_t>(ratios.size()) != design.n_components())
    throw Error(ErrorKind::design, "ratio vector has " + std::to_string(ratios.size()) +
                                       " entries for " + std::to_string(design.n_components()) +
                                       " components");
  for (Eigen::Index s = 0; s < ratios.size(); ++s)
    if (!(ratios[s] >= 0.0) || !std::isfinite(ratios[s]))
      throw Error(ErrorKind::invalid_input, "variance ratios must be finite and >= 0");
}

/// REL along one ratio when it is the only non-zero component. Uses the
/// eigenbasis of Z'(I - H)Z so each evaluation is O(q).
class SpectralProfile {
 public:
  SpectralProfile(const MatrixXd& projected_cross, const VectorXd& factor_resid,
                  double resid_ss, double log_det_xtx, Eigen::Index residual_df,
                  std::optional<double> fixed_scale)
      : log_det_xtx_(log_det_xtx), df_(static_cast<double>(residual_df)), fixed_scale_(fixed_scale) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(projected_cross);
    const VectorXd& ev = eig.eigenvalues();
    const double top = ev.size() > 0 ? std::max(ev.maxCoeff(), 0.0) : 0.0;
    double explained = 0.0;
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      if (ev[k] <= kEigenClip * std::max(1.0, top)) continue;
      const double c = eig.eigenvectors().col(k).dot(factor_resid) / std::sqrt(ev[k]);
      mu_.push_back(ev[k]);
      c2_.push_back(c * c);
      explained += c * c;
    }
    rest_ = std::max(resid_ss - explained, 0.0);
    scale_ = top;
  }

  double operator()(double ratio) const {
    double log_det = 0.0;
    double ypy = rest_;
    for (std::size_t k = 0; k < mu_.size(); ++k) {
      const double a = ratio * mu_[k];
      log_det += std::log1p(a);
      ypy += c2_[k] / (1.0 + a);
    }
    if (fixed_scale_)
      return -0.5 * (log_det + log_det_xtx_ + ypy / *fixed_scale_ + df_ * std::log(*fixed_scale_));
    return -0.5 * (log_det + log_det_xtx_ + df_ * std::log(ypy));
  }

  double scale() const noexcept { return scale_; }

 private:
  std::vector<double> mu_;
  std::vector<double> c2_;
  double rest_ = 0.0;
  double scale_ = 0.0;
  double log_det_xtx_;
  double df_;
  std::optional<double> fixed_scale_;
};

struct Optimum1D {
  double ratio = 0.0;
  double rel = -std::numeric_limits<double>::infinity();
  int evaluations = 0;
  bool converged = true;
};

/// Maximize rel_at(ratio) over ratio >= 0: a log-spaced scan to locate the
/// basin, Brent refinement inside it, then an explicit comparison with the
/// boundary value at zero.
template <class F>
Optimum1D maximize_ratio(F&& rel_at, double scale, const RemlOptions& options) {
  Optimum1D best;
  best.rel = rel_at(0.0);
  best.evaluations = 1;
  if (!(scale > 0.0)) return best;

  constexpr int kPerDecade = 3;
  const double lo = std::log(1e-6 / scale);
  const double step = std::log(10.0) / kPerDecade;
  std::vector<double> rho;
  std::vector<double> val;
  for (int i = 0; i <= 12 * kPerDecade; ++i) {
    rho.push_back(lo + step * i);
    val.push_back(rel_at(std::exp(rho.back())));
  }
  // Keep extending upward while the profile is still rising at the top.
  while (val.back() > val[val.size() - 2] && rho.back() < std::log(1e12 / scale)) {
    rho.push_back(rho.back() + step);
    val.push_back(rel_at(std::exp(rho.back())));
  }
  best.evaluations += static_cast<int>(rho.size());

  const auto k = static_cast<std::size_t>(std::max_element(val.begin(), val.end()) - val.begin());
  double interior_ratio = std::exp(rho[k]);
  double interior_rel = val[k];
  if (k > 0 && k + 1 < rho.size()) {
    std::uintmax_t iters = static_cast<std::uintmax_t>(std::max(options.max_evaluations - best.evaluations, 10));
    const std::uintmax_t budget = iters;
    auto neg = [&](double r) { return -rel_at(std::exp(r)); };
    const auto [r_opt, f_opt] = boost::math::tools::brent_find_minima(neg, rho[k - 1], rho[k + 1], 40, iters);
    best.evaluations += static_cast<int>(iters);
    if (iters >= budget) best.converged = false;
    if (-f_opt > interior_rel) {
      interior_rel = -f_opt;
      interior_ratio = std::exp(r_opt);
    }
  }
  if (interior_rel > best.rel + options.boundary_slack) {
    best.rel = interior_rel;
    best.ratio = interior_ratio;
  }
  return best;
}

struct NelderMeadResult {
  VectorXd x;
  double f = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Minimize f by Nelder-Mead with standard coefficients.
template <class F>
NelderMeadResult nelder_mead(F&& f, const VectorXd& x0, double step, int max_evals) {
  const Eigen::Index n = x0.size();
  std::vector<VectorXd> pts(n + 1, x0);
  std::vector<double> fv(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) pts[i + 1][i] += step;
  int evals = 0;
  for (Eigen::Index i = 0; i <= n; ++i) fv[i] = f(pts[i]), ++evals;

  std::vector<Eigen::Index> order(n + 1);
  bool converged = false;
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
    const auto best = order.front();
    const auto worst = order.back();
    const auto second = order[n - 1];

    double size = 0.0;
    for (Eigen::Index i = 0; i <= n; ++i)
      size = std::max(size, (pts[i] - pts[best]).cwiseAbs().maxCoeff());
    if (fv[worst] - fv[best] < 1e-11 && size < 1e-6) {
      converged = true;
      break;
    }

    VectorXd centroid = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i <= n; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);

    const VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    ++evals;
    if (fr < fv[best]) {
      const VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      ++evals;
      if (fe < fr) pts[worst] = xe, fv[worst] = fe;
      else pts[worst] = xr, fv[worst] = fr;
    } else if (fr < fv[second]) {
      pts[worst] = xr, fv[worst] = fr;
    } else {
      const bool outside = fr < fv[worst];
      const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                  : VectorXd(centroid + 0.5 * (pts[worst] - centroid));
      const double fc = f(xc);
      ++evals;
      if (fc < std::min(fr, fv[worst])) {
        pts[worst] = xc, fv[worst] = fc;
      } else {
        for (Eigen::Index i = 0; i <= n; ++i) {
          if (i == best) continue;
          pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
          fv[i] = f(pts[i]);
          ++evals;
        }
      }
    }
  }
  const auto best = static_cast<Eigen::Index>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  return {pts[best], fv[best], evals, converged};
}

std::vector<std::vector<std::size_t>> enumerate_faces(const std::vector<std::size_t>& free) {
  std::vector<std::vector<std::size_t>> faces;
  const std::size_t k = free.size();
  if (k <= 4) {
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
      std::vector<std::size_t> face;
      for (std::size_t i = 0; i < k; ++i)
        if (mask & (1u << i)) face.push_back(free[i]);
      faces.push_back(std::move(face));
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) faces.push_back({free[i]});
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<std::size_t> face;
      for (std::size_t j = 0; j < k; ++j)
        if (j != i) face.push_back(free[j]);
      faces.push_back(std::move(face));
    }
    faces.push_back(free);
  }
  std::stable_sort(faces.begin(), faces.end(),
                   [](const auto& a, const auto& b) { return a.size() < b.size(); });
  return faces;
}

}  // namespace

// ---------------------------------------------------------------------------
// LmmDesign

LmmDesign::LmmDesign(MatrixXd X, std::vector<RandomTerm> randoms)
    : X_(std::move(X)), randoms_(std::move(randoms)) {
  const Eigen::Index n = X_.rows();
  const Eigen::Index p = X_.cols();
  if (p < 1) throw Error(ErrorKind::design, "fixed-effect design needs at least one column");
  if (p >= n)
    throw Error(ErrorKind::design, "fixed-effect design has " + std::to_string(p) +
                                       " columns for " + std::to_string(n) + " observations");
  if (!X_.allFinite()) throw Error(ErrorKind::design, "fixed-effect design has non-finite entries");
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X_);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) throw Error(ErrorKind::design, "fixed-effect design is rank deficient");

  Eigen::Index q = 0;
  for (auto& term : randoms_) {
    if (term.Z.rows() != n)
      throw Error(ErrorKind::design, "random design '" + term.name + "' has " +
                                         std::to_string(term.Z.rows()) + " rows, expected " +
                                         std::to_string(n));
    if (term.Z.cols() < 1) throw Error(ErrorKind::design, "random design '" + term.name + "' is empty");
    if (!term.Z.allFinite())
      throw Error(ErrorKind::design, "random design '" + term.name + "' has non-finite entries");
    if (term.D.size() == 0) {
      term.D = MatrixXd::Identity(term.Z.cols(), term.Z.cols());
      sqrt_D_.push_back(term.D);
      factors_.push_back(term.Z);
    } else {
      if (term.D.rows() != term.Z.cols() || term.D.cols() != term.Z.cols())
        throw Error(ErrorKind::design, "structure matrix of '" + term.name + "' has the wrong size");
      sqrt_D_.push_back(symmetric_sqrt(term.D, term.name));
      factors_.push_back(term.Z * sqrt_D_.back());
    }
    offsets_.push_back(q);
    q += term.Z.cols();
  }
  stacked_.resize(n, q);
  for (std::size_t s = 0; s < factors_.size(); ++s)
    stacked_.middleCols(offsets_[s], factors_[s].cols()) = factors_[s];
}

std::optional<std::size_t> LmmDesign::find(const std::string& name) const {
  for (std::size_t s = 0; s < randoms_.size(); ++s)
    if (randoms_[s].name == name) return s;
  return std::nullopt;
}

LmmDesign LmmDesign::row_scaled(const VectorXd& sqrt_w) const {
  if (sqrt_w.size() != n_obs()) throw Error(ErrorKind::design, "row weights have the wrong length");
  std::vector<RandomTerm> terms = randoms_;
  for (auto& t : terms) t.Z = sqrt_w.asDiagonal() * t.Z;
  return LmmDesign(sqrt_w.asDiagonal() * X_, std::move(terms));
}

LmmDesign LmmDesign::subset(const std::vector<std::size_t>& components) const {
  std::vector<RandomTerm> terms;
  for (auto s : components) terms.push_back(randoms_.at(s));
  return LmmDesign(X_, std::move(terms));
}

MatrixXd build_marginal_cov(const LmmDesign& design, const VectorXd& ratios) {
  check_ratios(design, ratios);
  MatrixXd V = MatrixXd::Identity(design.n_obs(), design.n_obs());
  for (std::size_t s = 0; s < design.n_components(); ++s) {
    if (ratios[s] == 0.0) continue;
    const MatrixXd& G = design.factor(s);
    V.selfadjointView<Eigen::Lower>().rankUpdate(G, ratios[s]);
  }
  V.triangularView<Eigen::StrictlyUpper>() = V.transpose();
  return V;
}

// ---------------------------------------------------------------------------
// RestrictedLikelihood

struct RestrictedLikelihood::Factorized {
  MatrixXd L;  // Cholesky factor of the leading (q + p) block
  VectorXd last;  // last row of the augmented factor, first q + p entries
  double ypy = 0.0;
  VectorXd scale;
};

RestrictedLikelihood::RestrictedLikelihood(const LmmDesign& design, const VectorXd& y,
                                           std::optional<double> fixed_scale)
    : design_(&design), fixed_scale_(fixed_scale), q_(design.stacked_factor().cols()), p_(design.n_fixed()) {
  if (fixed_scale_ && !(*fixed_scale_ > 0.0 && std::isfinite(*fixed_scale_)))
    throw Error(ErrorKind::invalid_input, "fixed residual variance must be positive");
  const Eigen::Index n = design.n_obs();
  if (y.size() != n)
    throw Error(ErrorKind::design, "response has " + std::to_string(y.size()) +
                                       " entries, design has " + std::to_string(n) + " rows");
  if (!y.allFinite()) throw Error(ErrorKind::invalid_input, "response has non-finite entries");

  Eigen::HouseholderQR<MatrixXd> qr(design.X());
  beta_ols_ = qr.solve(y);
  const VectorXd r = y - design.X() * beta_ols_;
  const double rnorm = r.norm();
  if (!(rnorm > 1e-10 * std::max(y.norm(), std::numeric_limits<double>::min())))
    throw Error(ErrorKind::degenerate_response, "response lies in the column space of X");

  log_det_xtx_ = 2.0 * qr.matrixQR().diagonal().head(p_).cwiseAbs().array().log().sum();

  MatrixXd W(n, q_ + p_ + 1);
  W.leftCols(q_) = design.stacked_factor();
  W.middleCols(q_, p_) = design.X();
  W.col(q_ + p_) = r;
  cross_ = MatrixXd::Zero(W.cols(), W.cols());
  cross_.selfadjointView<Eigen::Lower>().rankUpdate(W.transpose());
  cross_.triangularView<Eigen::StrictlyUpper>() = cross_.transpose();
}

RestrictedLikelihood::Factorized RestrictedLikelihood::factorize(const VectorXd& ratios) const {
  check_ratios(*design_, ratios);
  const Eigen::Index m = q_ + p_;
  Factorized out;
  out.scale = VectorXd::Ones(m + 1);
  for (std::size_t s = 0; s < design_->n_components(); ++s) {
    const auto off = design_->factor_offset(s);
    out.scale.segment(off, design_->factor(s).cols()).setConstant(std::sqrt(ratios[s]));
  }
  MatrixXd A = out.scale.asDiagonal() * cross_ * out.scale.asDiagonal();
  A.diagonal().head(q_).array() += 1.0;

  Eigen::LLT<MatrixXd> llt(A.topLeftCorner(m, m));
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::design, "mixed-model system is not positive definite");
  out.L = llt.matrixL();
  out.last = out.L.triangularView<Eigen::Lower>().solve(A.col(m).head(m));
  out.ypy = A(m, m) - out.last.squaredNorm();
  if (!(out.ypy > 0.0))
    throw Error(ErrorKind::degenerate_response, "residual quadratic form is not positive");
  return out;
}

double RestrictedLikelihood::objective(double log_det, double ypy) const {
  const double df = static_cast<double>(residual_df());
  if (fixed_scale_) return -0.5 * (log_det + ypy / *fixed_scale_ + df * std::log(*fixed_scale_));
  return -0.5 * (log_det + df * std::log(ypy));
}

double RestrictedLikelihood::operator()(const VectorXd& ratios) const {
  const Factorized f = factorize(ratios);
  return objective(2.0 * f.L.diagonal().array().log().sum(), f.ypy);
}

RestrictedLikelihood::Solution RestrictedLikelihood::solve(const VectorXd& ratios) const {
  const Factorized f = factorize(ratios);
  Solution sol;
  const double log_det = 2.0 * f.L.diagonal().array().log().sum();
  sol.ypy = f.ypy;
  sol.rel = objective(log_det, f.ypy);

  const MatrixXd Lt = f.L.transpose();
  const VectorXd coef = Lt.triangularView<Eigen::Upper>().solve(f.last);
  sol.beta = coef.tail(p_) + beta_ols_;
  for (std::size_t s = 0; s < design_->n_components(); ++s) {
    const auto off = design_->factor_offset(s);
    const auto qs = design_->factor(s).cols();
    const VectorXd u = coef.segment(off, qs) * std::sqrt(ratios[s]);
    sol.blups.push_back(design_->sqrt_D_[s] * u);
  }
  return sol;
}

double RestrictedLikelihood::component_scale(std::size_t s) const {
  const MatrixXd& G = design_->factor(s);
  Eigen::HouseholderQR<MatrixXd> qr(design_->X());
  const MatrixXd QtG = (qr.householderQ().transpose() * G).topRows(p_);
  const auto off = design_->factor_offset(s);
  const MatrixXd M = cross_.block(off, off, G.cols(), G.cols()) - QtG.transpose() * QtG;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  return std::max(eig.eigenvalues().maxCoeff(), 0.0);
}

double restricted_log_lik(const LmmDesign& design, const VectorXd& y, const VectorXd& ratios) {
  return RestrictedLikelihood(design, y)(ratios);
}

// ---------------------------------------------------------------------------
// fit_reml

RemlFit fit_reml(const LmmDesign& design, const VectorXd& y, const std::vector<bool>& active,
                 const VectorXd& fixed_ratios, const RemlOptions& options,
                 const std::optional<VectorXd>& start) {
  const std::size_t S = design.n_components();
  if (active.size() != S)
    throw Error(ErrorKind::design, "active mask does not match the number of components");
  check_ratios(design, fixed_ratios);

  const RestrictedLikelihood rl(design, y, options.fixed_scale);
  std::vector<std::size_t> free;
  for (std::size_t s = 0; s < S; ++s)
    if (active[s]) free.push_back(s);

  VectorXd base = fixed_ratios;
  for (auto s : free) base[s] = 0.0;

  RemlFit fit;
  VectorXd best = base;
  double best_rel = rl(base);
  int evals = 1;
  bool converged = true;

  bool others_zero = true;
  for (std::size_t s = 0; s < S; ++s)
    if (!active[s] && fixed_ratios[s] != 0.0) others_zero = false;

  if (free.size() == 1 && others_zero) {
    // Single free component: spectral profile, O(q) per evaluation.
    const std::size_t s = free.front();
    const MatrixXd& G = design.factor(s);
    Eigen::HouseholderQR<MatrixXd> qr(design.X());
    const MatrixXd QtG = (qr.householderQ().transpose() * G).topRows(design.n_fixed());
    const VectorXd r = y - design.X() * qr.solve(y);
    const MatrixXd M = G.transpose() * G - QtG.transpose() * QtG;
    const double log_det_xtx =
        2.0 * qr.matrixQR().diagonal().head(design.n_fixed()).cwiseAbs().array().log().sum();
    const SpectralProfile profile(M, G.transpose() * r, r.squaredNorm(), log_det_xtx,
                                  rl.residual_df(), options.fixed_scale);
    const Optimum1D opt = maximize_ratio(profile, profile.scale(), options);
    evals += opt.evaluations;
    converged = opt.converged;
    best[s] = opt.ratio;
    best_rel = rl(best);
  } else if (!free.empty()) {
    std::vector<double> scales(S, 0.0);
    for (auto s : free) scales[s] = rl.component_scale(s);

    // Explicit boundary treatment: optimize on every face of the box where a
    // subset of the free components is interior and the rest sit at zero.
    VectorXd hint = VectorXd::Zero(static_cast<Eigen::Index>(S));
    if (start && start->size() == static_cast<Eigen::Index>(S)) hint = start->cwiseMax(0.0);

    for (const auto& face : enumerate_faces(free)) {
      VectorXd ratios = base;
      double rel = 0.0;
      if (face.size() == 1) {
        const std::size_t s = face.front();
        auto rel_at = [&](double lambda) {
          VectorXd r = base;
          r[s] = lambda;
          return rl(r);
        };
        const Optimum1D opt = maximize_ratio(rel_at, scales[s], options);
        evals += opt.evaluations;
        converged = converged && opt.converged;
        ratios[s] = opt.ratio;
        rel = opt.rel;
        if (opt.ratio > 0.0 && !(hint[s] > 0.0)) hint[s] = opt.ratio;
      } else {
        VectorXd x0(face.size());
        std::vector<double> lo(face.size()), hi(face.size());
        for (std::size_t i = 0; i < face.size(); ++i) {
          const std::size_t s = face[i];
          const double sc = scales[s] > 0.0 ? scales[s] : 1.0;
          const double h = hint[s] > 0.0 ? hint[s] : 0.1 / sc;
          x0[i] = std::log(h);
          lo[i] = std::log(1e-10 / sc);
          hi[i] = std::log(1e10 / sc);
        }
        auto to_ratios = [&](const VectorXd& x) {
          VectorXd r = base;
          for (std::size_t i = 0; i < face.size(); ++i)
            r[face[i]] = std::exp(std::clamp(x[i], lo[i], hi[i]));
          return r;
        };
        auto neg = [&](const VectorXd& x) { return -rl(to_ratios(x)); };
        const int budget = options.max_evaluations * static_cast<int>(face.size());
        NelderMeadResult nm = nelder_mead(neg, x0, 1.0, budget);
        // One restart from the incumbent guards against a collapsed simplex.
        NelderMeadResult again = nelder_mead(neg, nm.x, 0.25, budget);
        evals += nm.evaluations + again.evaluations;
        converged = converged && again.converged;
        if (again.f <= nm.f) nm = again;
        ratios = to_ratios(nm.x);
        rel = -nm.f;
        if (face.size() == free.size())
          for (std::size_t i = 0; i < face.size(); ++i) hint[face[i]] = ratios[face[i]];
      }
      // Smaller faces were visited first, so a later face must beat the
      // incumbent by more than the slack to move off the boundary.
      if (rel > best_rel + options.boundary_slack) {
        best_rel = rel;
        best = ratios;
      }
    }
  }

  const auto sol = rl.solve(best);
  fit.beta = sol.beta;
  fit.sigma2_e = options.fixed_scale ? *options.fixed_scale
                                     : sol.ypy / static_cast<double>(rl.residual_df());
  fit.ratios = best;
  fit.rel = sol.rel;
  fit.blups = sol.blups;
  fit.converged = converged;
  fit.evaluations = evals;
  return fit;
}

RemlFit fit_reml(const LmmDesign& design, const VectorXd& y, const RemlOptions& options) {
  const std::size_t S = design.n_components();
  return fit_reml(design, y, std::vector<bool>(S, true),
                  VectorXd::Zero(static_cast<Eigen::Index>(S)), options);
}

VectorXd random_predictor(const LmmDesign& design, const std::vector<VectorXd>& blups) {
  VectorXd out = VectorXd::Zero(design.n_obs());
  for (std::size_t s = 0; s < design.n_components() && s < blups.size(); ++s)
    out += design.random(s).Z * blups[s];
  return out;
}

}  // namespace vcgate::lmm
