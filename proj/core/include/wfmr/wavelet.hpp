#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace wfmr {

struct MixtureParams;

enum class WaveletFamily { Haar, DaubechiesLeastAsymmetric };
enum class Boundary { Periodic };

/// Orthonormal wavelet basis used to move curves into coefficient space.
///
/// `j0` is the coarsest level kept: a length-2^p transform holds 2^j0 scaling
/// coefficients followed by detail blocks for levels j0..p-1. It is checked
/// against the signal length when a transform runs, not here.
struct WaveletSpec {
  WaveletFamily family = WaveletFamily::DaubechiesLeastAsymmetric;
  int vanishing_moments = 8;
  Boundary boundary = Boundary::Periodic;
  int j0 = 0;

  static WaveletSpec haar(int j0 = 0);
  static WaveletSpec symmlet(int vanishing_moments = 8, int j0 = 0);

  /// Accepts "haar", "sym4", "sym8", "la8" (case-insensitive).
  static WaveletSpec parse(std::string_view name, int j0 = 0);
  std::string name() const;

  bool operator==(const WaveletSpec&) const = default;
};

/// Low-pass reconstruction filter h with sum(h) = sqrt(2) and unit energy.
std::span<const double> lowpass_filter(const WaveletSpec& spec);

/// Quadrature mirror of h: g[k] = (-1)^k h[L-1-k].
std::vector<double> highpass_filter(std::span<const double> lowpass);

/// Scaling block then detail blocks, coarse to fine.
struct CoeffVector {
  int j0 = 0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  /// log2(size()).
  int depth() const;

  std::span<const double> scaling() const;
  std::span<const double> detail(int level) const;
  std::span<double> detail(int level);

  /// First index of the detail block at `level` (level >= j0).
  static std::size_t detail_offset(int level) noexcept { return std::size_t{1} << level; }
};

/// True for 1, 2, 4, ...
bool is_dyadic(std::size_t n) noexcept;
int log2_exact(std::size_t n);

CoeffVector dwt(std::span<const double> signal, const WaveletSpec& spec);
std::vector<double> idwt(const CoeffVector& coeffs, const WaveletSpec& spec);

/// n x (N+1) design: column 0 is the intercept column of ones, the rest of
/// row i is dwt(curve_i).
using DesignMatrix = Eigen::MatrixXd;

DesignMatrix build_design(const std::vector<std::vector<double>>& curves, const WaveletSpec& spec);
/// Rows of `curves` are the sampled predictors.
DesignMatrix build_design(const Eigen::MatrixXd& curves, const WaveletSpec& spec);

/// Coefficient functions on the sampling grid: omega_r = idwt(phi_r / rho_r)
/// with the intercept entry dropped.
std::vector<std::vector<double>> reconstruct_omegas(const MixtureParams& params,
                                                    const WaveletSpec& spec);

}  // namespace wfmr
