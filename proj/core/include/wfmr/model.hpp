#pragma once

#include <Eigen/Dense>

#include "wfmr/wavelet.hpp"

namespace wfmr {

/// Reparameterized mixture of C Gaussian regressions.
///
/// Column r of `phi` is phi_r = beta_r / sigma_r; entry 0 is the scaled
/// intercept alpha_r / sigma_r. `rho(r)` is 1 / sigma_r and `pi` holds all C
/// mixing proportions (the last one is implied by the others but stored).
struct MixtureParams {
  Eigen::MatrixXd phi;
  Eigen::VectorXd rho;
  Eigen::VectorXd pi;

  int components() const noexcept { return static_cast<int>(rho.size()); }
  /// N + 1.
  Eigen::Index coeff_length() const noexcept { return phi.rows(); }

  /// Throws InvalidParams if the invariants on shapes, rho or pi fail.
  void validate() const;

  /// phi, rho and pi-prefix concatenated in that order; used for the
  /// relative-change convergence test.
  Eigen::VectorXd flatten() const;

  /// Zeros for phi, rho = 2, pi = 1/C.
  static MixtureParams starting(int components, Eigen::Index coeff_length);
};

/// beta_r, sigma_r, pi_r. Column r of `beta` includes the intercept alpha_r.
struct NaturalParams {
  Eigen::MatrixXd beta;
  Eigen::VectorXd sigma;
  Eigen::VectorXd pi;
};

NaturalParams to_natural(const MixtureParams& params);
MixtureParams from_natural(const NaturalParams& natural);

/// n x C posterior membership probabilities.
using Responsibilities = Eigen::MatrixXd;

/// N x C nonnegative weights, one per non-intercept coefficient.
using PenaltyWeights = Eigen::MatrixXd;

PenaltyWeights uniform_weights(Eigen::Index signal_length, int components);

/// n x C matrix of log(pi_r) + log(rho_r) - log(2 pi)/2 - (rho_r y_i - z_i phi_r)^2 / 2.
Eigen::MatrixXd component_log_densities(const MixtureParams& params, const Eigen::VectorXd& y,
                                        const DesignMatrix& z);

double log_likelihood(const MixtureParams& params, const Eigen::VectorXd& y, const DesignMatrix& z);

/// sum_r pi_r^gamma * sum_q w_{r,q} |phi_{r,q}|, intercept excluded.
double penalty_term(const MixtureParams& params, const PenaltyWeights& weights, double gamma = 1.0);

/// -loglik / n + lambda * penalty_term.
double penalized_objective(const MixtureParams& params, const Eigen::VectorXd& y,
                           const DesignMatrix& z, double lambda, const PenaltyWeights& weights,
                           double gamma = 1.0);

Responsibilities responsibilities(const MixtureParams& params, const Eigen::VectorXd& y,
                                  const DesignMatrix& z);

/// -2 * loglik on held-out data.
double predictive_loss(const MixtureParams& params, const Eigen::VectorXd& y_new,
                       const DesignMatrix& z_new);

}  // namespace wfmr
