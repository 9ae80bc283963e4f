#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "wfmr/model.hpp"

namespace wfmr {

struct FitConfig {
  int components = 2;
  double lambda = 0.0;
  double tol = 1e-6;
  int max_em_iters = 500;
  /// Every `active_set_period`-th EM iteration sweeps all coordinates; the
  /// others only revisit the coordinates that were nonzero after the last
  /// full sweep. Values <= 1 sweep everything every time.
  int active_set_period = 11;
  std::uint64_t seed = 1;
  bool adaptive = false;
  double adaptive_eps = 1e-3;
  /// Exponent on pi_r in the penalty; 0, 0.5 and 1 are the supported values.
  double gamma = 1.0;

  void validate() const;
};

struct FitResult {
  MixtureParams params;
  Responsibilities responsibilities;
  std::vector<double> objective_trace;
  int n_iters = 0;
  bool converged = false;
  std::vector<int> active_counts;
  /// Non-intercept coefficients estimated exactly zero, counted over all
  /// components (at most C * N).
  int q0 = 0;
  /// Components whose responsibility mass stayed below 1e-6 * n for 20
  /// consecutive iterations.
  std::vector<bool> degenerate;
  double log_likelihood = 0.0;
  double lambda = 0.0;
  PenaltyWeights weights;
};

struct InitialState {
  MixtureParams params;
  Responsibilities responsibilities;
};

/// Random 0.9 / 0.1 class weights followed by one M-step from phi = 0,
/// rho = 2, pi = 1/C.
InitialState initialize(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config);

/// The 0.9 / 0.1 starting weights alone, before the M-step.
Responsibilities initial_weights(Eigen::Index n, int components, std::uint64_t seed);

/// Minimizes -sum_r a_r log pi_r + lambda * sum_r pi_r^gamma pen_r over the
/// simplex, with a_r the mean responsibility. For gamma in (0, 1) the concave
/// pi^gamma is majorized by its tangent at `current_pi`, which keeps the
/// step a descent step. Proportions are floored at 1e-8.
Eigen::VectorXd update_pi(const Responsibilities& resp, const Eigen::MatrixXd& phi,
                          const Eigen::VectorXd& current_pi, double lambda,
                          const PenaltyWeights& weights, double gamma = 1.0);

/// Solves sum_r a_r / (nu + c_r) = 1 for nu and returns a_r / (nu + c_r).
Eigen::VectorXd simplex_kkt_solution(const Eigen::VectorXd& a, const Eigen::VectorXd& c);

double update_rho(int r, const Responsibilities& resp, const Eigen::VectorXd& y,
                  const DesignMatrix& z, const Eigen::VectorXd& phi_r);

double update_intercept(int r, const Responsibilities& resp, const Eigen::VectorXd& y,
                        const DesignMatrix& z, double rho, const Eigen::VectorXd& phi_r);

/// S_q = -rho <Z~_q, Y~> + sum_{s != q} phi_s <Z~_q, Z~_s>, evaluated directly.
/// `phi_r` must hold the newest values for s < q and the previous ones for s > q.
double coordinate_score(int r, Eigen::Index q, const Responsibilities& resp,
                        const Eigen::VectorXd& y, const DesignMatrix& z, double rho,
                        const Eigen::VectorXd& phi_r);

struct CoordinateStep {
  double value = 0.0;
  /// Zero column with |S_q| above the threshold.
  bool degenerate_column = false;
};

/// Soft-threshold rule for one non-intercept coordinate.
CoordinateStep coordinate_update(double score, double threshold, double column_norm_sq);

/// Penalized EM. `weights` defaults to all ones. With `warm_start` the random
/// initialization is skipped and iteration begins from those parameters.
FitResult em_fit(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                 const std::optional<PenaltyWeights>& weights = std::nullopt,
                 const std::optional<MixtureParams>& warm_start = std::nullopt);

/// w_{r,q} = 1 / (|phi_{r,q}| + eps), intercept excluded.
PenaltyWeights adaptive_weights(const MixtureParams& stage1, double eps);

/// Unit-weight fit, then a reweighted fit warm-started from it. Component
/// labels carry over from the first stage.
FitResult adaptive_fit(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                       const std::optional<MixtureParams>& warm_start = std::nullopt);

/// Dispatches on config.adaptive.
FitResult fit(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
              const std::optional<MixtureParams>& warm_start = std::nullopt);

/// Smallest lambda at which an em_fit with this config keeps every
/// non-intercept coefficient at zero. Computed by replaying the
/// intercept-only EM trajectory and taking the largest |S_q| / (n pi_r^gamma w_{r,q})
/// met along the way.
double lambda_max(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                  const std::optional<PenaltyWeights>& weights = std::nullopt);

}  // namespace wfmr
