#include "vcgate/nulldist.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "vcgate/errors.hpp"
#include "vcgate/rng.hpp"

namespace vcgate::nulldist {

namespace {

constexpr int kGridPoints = 200;
constexpr int kChunk = 512;

std::vector<double> sorted_clipped(const VectorXd& ev) {
  std::vector<double> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), std::greater<>());
  const double top = out.empty() ? 0.0 : std::max(out.front(), 0.0);
  for (auto& v : out)
    if (v < 1e-10 * std::max(1.0, top)) v = 0.0;
  return out;
}

void check_full_rank(const MatrixXd& X) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (X.cols() < 1 || qr.rank() < X.cols())
    throw Error(ErrorKind::design, "fixed-effect design is rank deficient");
}

}  // namespace

const char* to_string(NullKind kind) noexcept {
  return kind == NullKind::finite_sample ? "finite_sample" : "chisq_mixture";
}

double NullDistribution::zero_fraction() const {
  if (samples.empty()) return 0.0;
  const auto zeros = std::count(samples.begin(), samples.end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(samples.size());
}

std::vector<double> projected_eigenvalues(const MatrixXd& X, const MatrixXd& Z) {
  if (Z.cols() < 1) throw Error(ErrorKind::design, "random design has no columns");
  if (X.rows() != Z.rows()) throw Error(ErrorKind::design, "X and Z row counts differ");
  check_full_rank(X);
  Eigen::HouseholderQR<MatrixXd> qr(X);
  const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(X.rows(), X.cols());
  const MatrixXd R = Z - Q * (Q.transpose() * Z);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(R.transpose() * R, Eigen::EigenvaluesOnly);
  return sorted_clipped(eig.eigenvalues());
}

std::vector<double> whitened_eigenvalues(const lmm::LmmDesign& design, std::size_t tested,
                                         const VectorXd& nuisance_ratios) {
  if (tested >= design.n_components())
    throw Error(ErrorKind::design, "tested component index out of range");
  if (static_cast<std::size_t>(nuisance_ratios.size()) != design.n_components())
    throw Error(ErrorKind::design, "nuisance ratio vector has the wrong length");

  std::vector<MatrixXd> parts;
  Eigen::Index q0 = 0;
  for (std::size_t s = 0; s < design.n_components(); ++s) {
    if (s == tested || !(nuisance_ratios[s] > 0.0)) continue;
    parts.push_back(std::sqrt(nuisance_ratios[s]) * design.factor(s));
    q0 += parts.back().cols();
  }
  const MatrixXd& G = design.factor(tested);
  if (q0 == 0) return projected_eigenvalues(design.X(), G);

  const Eigen::Index n = design.n_obs();
  const Eigen::Index qs = G.cols();
  const Eigen::Index p = design.n_fixed();
  MatrixXd H(n, q0);
  for (Eigen::Index off = 0; const auto& part : parts) {
    H.middleCols(off, part.cols()) = part;
    off += part.cols();
  }
  MatrixXd A(n, qs + p);
  A << G, design.X();

  // A' V0^{-1} A by Woodbury, then the Schur complement that removes X.
  MatrixXd M0 = MatrixXd::Identity(q0, q0) + H.transpose() * H;
  const Eigen::LLT<MatrixXd> llt(M0);
  const MatrixXd HtA = H.transpose() * A;
  const MatrixXd C = A.transpose() * A - HtA.transpose() * llt.solve(HtA);
  const MatrixXd Cxx = C.bottomRightCorner(p, p);
  const MatrixXd Cxg = C.bottomLeftCorner(p, qs);
  const Eigen::LDLT<MatrixXd> xx(Cxx);
  MatrixXd M = C.topLeftCorner(qs, qs) - Cxg.transpose() * xx.solve(Cxg);
  M = 0.5 * (M + M.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  return sorted_clipped(eig.eigenvalues());
}

std::vector<double> simulate_finite_null(const std::vector<double>& mus, long N, long p, int B,
                                         std::uint64_t seed, int threads) {
  if (B < 1) throw Error(ErrorKind::invalid_input, "null sample count must be >= 1");
  std::vector<double> pos;
  for (double m : mus) {
    if (!std::isfinite(m) || m < 0.0)
      throw Error(ErrorKind::invalid_input, "projected eigenvalues must be finite and >= 0");
    if (m > 0.0) pos.push_back(m);
  }
  const long K = static_cast<long>(pos.size());
  const long rest_df = N - p - K;
  if (rest_df < 1)
    throw Error(ErrorKind::insufficient_df, "N - p - K = " + std::to_string(rest_df) + " < 1");

  std::vector<double> out(static_cast<std::size_t>(B), 0.0);
  if (K == 0) return out;

  const double top = *std::max_element(pos.begin(), pos.end());
  const double lo = std::log(1e-5 / top);
  const double hi = std::log(1e5 / top);
  // Row j holds lambda_j mu_s / (1 + lambda_j mu_s) and 1 / (1 + lambda_j mu_s).
  Eigen::MatrixXd shrink(kGridPoints, K), keep(kGridPoints, K);
  Eigen::VectorXd log_det(kGridPoints);
  for (int j = 0; j < kGridPoints; ++j) {
    const double lambda = std::exp(lo + (hi - lo) * j / (kGridPoints - 1));
    double ld = 0.0;
    for (long s = 0; s < K; ++s) {
      const double a = lambda * pos[static_cast<std::size_t>(s)];
      shrink(j, s) = a / (1.0 + a);
      keep(j, s) = 1.0 / (1.0 + a);
      ld += std::log1p(a);
    }
    log_det[j] = ld;
  }
  const double resid_df = static_cast<double>(N - p);

  const int n_chunks = (B + kChunk - 1) / kChunk;
  auto run_chunk = [&](int c) {
    Rng rng(substream_seed(seed, {static_cast<std::uint64_t>(c)}));
    std::normal_distribution<double> normal;
    std::chi_squared_distribution<double> chisq(static_cast<double>(rest_df));
    Eigen::VectorXd w2(K);
    const int first = c * kChunk;
    const int last = std::min(B, first + kChunk);
    for (int b = first; b < last; ++b) {
      for (long s = 0; s < K; ++s) {
        const double w = normal(rng);
        w2[s] = w * w;
      }
      const double R = chisq(rng);
      const Eigen::VectorXd num = shrink * w2;
      const Eigen::VectorXd den = (keep * w2).array() + R;
      double best = 0.0;
      for (int j = 0; j < kGridPoints; ++j) {
        const double v = resid_df * std::log1p(num[j] / den[j]) - log_det[j];
        best = std::max(best, v);
      }
      out[static_cast<std::size_t>(b)] = best;
    }
  };

  const int workers = std::clamp(threads, 1, n_chunks);
  if (workers == 1) {
    for (int c = 0; c < n_chunks; ++c) run_chunk(c);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (int c = next++; c < n_chunks; c = next++) run_chunk(c);
      });
    for (auto& th : pool) th.join();
  }
  return out;
}

NullDistribution make_finite_null(const std::vector<double>& mus, long N, long p, int B,
                                  std::uint64_t seed, int threads) {
  NullDistribution null;
  null.kind = NullKind::finite_sample;
  null.samples = simulate_finite_null(mus, N, p, B, seed, threads);
  null.B = B;
  null.seed = seed;
  null.eigenvalues = mus;
  return null;
}

double mixture_pvalue(double stat) {
  if (!(stat >= 0.0)) throw Error(ErrorKind::invalid_statistic, "statistic must be >= 0");
  if (stat == 0.0) return 1.0;
  return 0.5 * std::erfc(std::sqrt(stat / 2.0));
}

double empirical_pvalue(double stat, const NullDistribution& null) {
  if (!(stat >= 0.0)) throw Error(ErrorKind::invalid_statistic, "statistic must be >= 0");
  if (null.kind != NullKind::finite_sample || null.samples.empty())
    throw Error(ErrorKind::invalid_null, "empirical p-value needs simulated null samples");
  const auto exceed = std::count_if(null.samples.begin(), null.samples.end(),
                                    [stat](double v) { return v >= stat; });
  return (1.0 + static_cast<double>(exceed)) / (static_cast<double>(null.samples.size()) + 1.0);
}

int default_threads() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  int n = static_cast<int>(hw);
  if (const char* env = std::getenv("VCGATE_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap >= 1) n = std::min(n, cap);
    } catch (const std::exception&) {
      // Ignore malformed values.
    }
  }
  return std::max(n, 1);
}

}  // namespace vcgate::nulldist
