#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "vcgate/lmm.hpp"

namespace vcgate::nulldist {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class NullKind { finite_sample, chisq_mixture };

const char* to_string(NullKind kind) noexcept;

/// Null distribution of the restricted likelihood ratio statistic.
struct NullDistribution {
  NullKind kind = NullKind::chisq_mixture;
  std::vector<double> samples;
  int B = 0;
  std::uint64_t seed = 0;
  std::vector<double> eigenvalues;

  double zero_fraction() const;
};

inline constexpr int kDefaultNullSamples = 10000;

/// Eigenvalues of Z'(I - H_X)Z in nonincreasing order; tiny values are
/// clipped to exactly zero.
std::vector<double> projected_eigenvalues(const MatrixXd& X, const MatrixXd& Z);

/// Eigenvalues of G_S' P0 G_S where P0 is the REML projection under
/// V0 = I + sum_{s != S} ratio_s G_s G_s' and G_S = Z_S D_S^{1/2}. This is the
/// spectrum of the tested design after whitening by V0^{-1/2}; with no
/// nuisance components it reduces to projected_eigenvalues.
std::vector<double> whitened_eigenvalues(const lmm::LmmDesign& design, std::size_t tested,
                                         const VectorXd& nuisance_ratios);

/// Draws B values of sup_{lambda >= 0} [(N-p) log(1 + N_l/D_l) - sum log(1 + lambda mu_s)]
/// over a {0} + 200-point log grid. Deterministic in (mus, N, p, B, seed) and
/// independent of the number of worker threads.
std::vector<double> simulate_finite_null(const std::vector<double>& mus, long N, long p, int B,
                                         std::uint64_t seed, int threads = 1);

NullDistribution make_finite_null(const std::vector<double>& mus, long N, long p, int B,
                                  std::uint64_t seed, int threads = 1);

/// 0.5 chi2_0 : 0.5 chi2_1 upper tail. Equal to 1 at stat = 0.
double mixture_pvalue(double stat);

/// (1 + #{samples >= stat}) / (B + 1).
double empirical_pvalue(double stat, const NullDistribution& null);

/// Worker count from VCGATE_THREADS, capped by the hardware; at least 1.
int default_threads();

}  // namespace vcgate::nulldist
