#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "vcgate/lmm.hpp"

namespace support {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd indicator(int groups, int per) {
  MatrixXd Z = MatrixXd::Zero(groups * per, groups);
  for (int i = 0; i < groups; ++i) Z.block(i * per, i, per, 1).setOnes();
  return Z;
}

inline MatrixXd intercept_slope(const VectorXd& x) {
  MatrixXd X(x.size(), 2);
  X.col(0).setOnes();
  X.col(1) = x;
  return X;
}

inline std::vector<MatrixXd> outer_products(const vcgate::lmm::LmmDesign& d) {
  std::vector<MatrixXd> out;
  for (std::size_t s = 0; s < d.n_components(); ++s)
    out.push_back(d.factor(s) * d.factor(s).transpose());
  return out;
}

/// Random-intercept data y = 1 + x + u_i + e with Var(u) = sigma2.
struct Instance {
  vcgate::lmm::LmmDesign design;
  VectorXd y;
};

inline Instance random_intercept(int groups, int per, double sigma2, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif;
  const int n = groups * per;
  VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) x[i] = unif(rng);
  VectorXd u(groups);
  for (int g = 0; g < groups; ++g) u[g] = std::sqrt(sigma2) * normal(rng);
  for (int i = 0; i < n; ++i) y[i] = 1.0 + x[i] + u[i / per] + normal(rng);
  vcgate::lmm::LmmDesign d(intercept_slope(x), {{"group", indicator(groups, per), MatrixXd()}});
  return {std::move(d), std::move(y)};
}

}  // namespace support
