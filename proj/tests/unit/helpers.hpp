#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace adml::testing {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = z(rng);
  return out;
}

inline Eigen::VectorXd uniform(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = u(rng);
  return out;
}

inline Eigen::VectorXd bernoulli(Eigen::Index n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = b(rng) ? 1.0 : 0.0;
  return out;
}

inline double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

}  // namespace adml::testing
