#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wfmr/data.hpp"
#include "wfmr/fit.hpp"
#include "wfmr/wavelet.hpp"

namespace wfmr {

enum class Scenario { FixCJ0 = 1, SelectC = 2, SelectJ0 = 3 };
enum class SelectionRule { CV5, BIC, ValidationLoss };

std::string_view to_string(SelectionRule rule) noexcept;
SelectionRule parse_rule(std::string_view name);

/// 1e-2 when n <= number of design columns, 1e-3 otherwise.
double default_min_ratio(Eigen::Index n, Eigen::Index columns) noexcept;

/// log-spaced from lambda_max down to min_ratio * lambda_max, descending.
/// min_ratio = 0 picks default_min_ratio.
std::vector<double> lambda_grid(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                                int n_points = 100, double min_ratio = 0.0);

/// (N + 3) * C - 1 - q0.
double effective_parameters(Eigen::Index signal_length, int components, int q0) noexcept;

/// -2 loglik + log(n) * d_e.
double modified_bic(const FitResult& fit, Eigen::Index n);

struct TuneGrid {
  std::vector<int> components{2};
  std::vector<int> j0_values{0};
  /// Shared descending lambda values. Empty means a data-driven grid per
  /// (C, j0) built by lambda_grid on the full training data.
  std::vector<double> lambdas;
  int n_lambda = 100;
  /// 0 = default_min_ratio of the training data.
  double lambda_min_ratio = 0.0;
  Scenario scenario = Scenario::FixCJ0;

  void validate() const;

  /// Scenario 1 fixes C and j0, 2 searches C in {1, 2, 3}, 3 searches
  /// j0 in {0, ..., log2(N) - 1}.
  static TuneGrid for_scenario(Scenario scenario, Eigen::Index signal_length, int fixed_components,
                               int fixed_j0, int n_lambda = 100);
};

struct TuneOptions {
  /// components and lambda are overwritten per cell; the rest applies to
  /// every fit.
  FitConfig fit;
  /// Family and vanishing moments; j0 comes from the grid.
  WaveletSpec wavelet;
  /// Every cell starts from the seeded random initialization. With this set,
  /// each lambda path is instead fit from the largest value down, each fit
  /// warm-started from the previous one: faster, but a poor early solution
  /// is carried along the whole path.
  bool warm_start_path = false;
  int folds = 5;
  std::uint64_t fold_seed = 1;
  /// 0 = worker_count().
  std::size_t workers = 0;
};

struct TuneRecord {
  int components = 0;
  int j0 = 0;
  double lambda = 0.0;
  double criterion = 0.0;
  bool ok = false;
  std::string failure;
  int n_iters = 0;
  bool converged = false;
  int q0 = 0;
  double log_likelihood = 0.0;
};

struct TuneResult {
  std::vector<TuneRecord> records;
  TuneRecord best;
  SelectionRule rule = SelectionRule::BIC;
  /// Test-set predictive loss of the selected model (train/validate/test only).
  std::optional<double> test_loss;
  /// Selected model refit on the full training data.
  std::optional<FitResult> best_fit;
};

/// Argmin of criterion over successful records; exact ties go to larger
/// lambda, then smaller C, then smaller j0.
TuneRecord select_best(const std::vector<TuneRecord>& records);

/// Seeded uniform fold label in [0, k) per observation, balanced sizes.
std::vector<int> fold_assignment(Eigen::Index n, int k, std::uint64_t seed);

/// Lambda path fits for one (C, j0) on one dataset; failed fits are nullopt
/// with the message in `failures`.
std::vector<std::optional<FitResult>> fit_path(const Eigen::VectorXd& y, const DesignMatrix& z,
                                               const FitConfig& config, const std::vector<double>& lambdas,
                                               bool warm_start, std::vector<std::string>* failures = nullptr);

TuneResult kfold_cv(const CurveData& data, const TuneGrid& grid, const TuneOptions& options);
TuneResult bic_select(const CurveData& data, const TuneGrid& grid, const TuneOptions& options);
TuneResult train_validate_test(const CurveData& train, const CurveData& valid, const CurveData& test,
                               const TuneGrid& grid, const TuneOptions& options);

/// Scenario 2 over C in grid.components with the chosen rule.
TuneResult select_components(const CurveData& data, const TuneGrid& grid, SelectionRule rule,
                             const TuneOptions& options);

/// CV5 or BIC dispatch.
TuneResult tune(const CurveData& data, const TuneGrid& grid, SelectionRule rule, const TuneOptions& options);

}  // namespace wfmr
