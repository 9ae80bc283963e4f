#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "wfmr/model.hpp"

namespace testutil {

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, std::uint64_t seed, double sd = 1.0) {
  return gaussian_matrix(n, 1, seed, sd).col(0);
}

/// Design with a leading column of ones and Gaussian columns after it.
inline Eigen::MatrixXd random_design(Eigen::Index n, Eigen::Index cols, std::uint64_t seed) {
  Eigen::MatrixXd z = gaussian_matrix(n, cols, seed);
  z.col(0).setOnes();
  return z;
}

inline wfmr::MixtureParams random_params(int c, Eigen::Index len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::normal_distribution<double> g(0.0, 0.3);
  wfmr::MixtureParams p;
  p.phi.resize(len, c);
  for (Eigen::Index i = 0; i < p.phi.size(); ++i) p.phi.data()[i] = g(rng);
  p.rho.resize(c);
  p.pi.resize(c);
  for (int r = 0; r < c; ++r) {
    p.rho(r) = u(rng);
    p.pi(r) = u(rng);
  }
  p.pi /= p.pi.sum();
  return p;
}

}  // namespace testutil
