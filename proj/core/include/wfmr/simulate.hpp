#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "wfmr/data.hpp"

namespace wfmr {

enum class CoefficientFamily { Smooth, Bumpy };

CoefficientFamily parse_family(std::string_view name);
std::string_view to_string(CoefficientFamily family) noexcept;

/// t_j = j / (N + 1), j = 1..N: equally spaced and strictly inside (0, 1).
std::vector<double> sampling_grid(std::size_t n_points);

/// min(s, t) * (1 - max(s, t)).
double bridge_covariance(double s, double t) noexcept;

/// Exact Brownian-bridge sampler on a fixed grid via the Cholesky factor of
/// the covariance matrix.
class BrownianBridge {
 public:
  explicit BrownianBridge(std::span<const double> grid);

  std::size_t size() const noexcept { return static_cast<std::size_t>(factor_.rows()); }
  Eigen::VectorXd sample(std::mt19937_64& rng) const;

 private:
  Eigen::MatrixXd factor_;
};

/// One bridge path on sampling_grid(n_points).
std::vector<double> brownian_bridge(std::size_t n_points, std::uint64_t seed);

/// omega_1 or omega_2 (component 0 or 1) of the given family at t.
double coefficient_value(CoefficientFamily family, int component, double t);

/// Both coefficient functions sampled on `grid`.
std::vector<std::vector<double>> coefficient_functions(CoefficientFamily family,
                                                       std::span<const double> grid);

/// Var(N^-1 sum_j X(t_j) omega(t_j)) for a Brownian-bridge X, by exact
/// double sum over the grid.
double signal_variance(std::span<const double> grid, std::span<const double> omega);

/// Common noise SD that makes the mixture R^2 equal `r2`.
double calibrate_sigma(CoefficientFamily family, std::span<const double> grid, double r2,
                       std::span<const double> mixing);

struct SimSetting {
  CoefficientFamily family = CoefficientFamily::Smooth;
  std::size_t n_points = 128;
  std::size_t n = 100;
  double r2 = 0.9;
  /// One or two proportions; component r uses coefficient function r.
  std::vector<double> mixing{0.5, 0.5};
  /// Empty means all zero.
  std::vector<double> intercepts;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimDataset {
  std::vector<double> grid;
  Eigen::MatrixXd curves;
  Eigen::VectorXd responses;
  /// Noise-free part alpha_r + N^-1 sum_j X(t_j) omega_r(t_j).
  Eigen::VectorXd signal;
  /// True component, 1-based.
  std::vector<int> labels;
  double sigma = 0.0;

  CurveData data() const { return {curves, responses}; }
};

SimDataset generate_dataset(const SimSetting& setting);

/// Within-component explained variance: pooled signal variance over pooled
/// response variance, both centered per true label.
double empirical_r2(const SimDataset& dataset);

}  // namespace wfmr
