#include "wfmr/wavelet.hpp"

#include <bit>
#include <string>

#include "wfmr/error.hpp"
#include "wfmr/model.hpp"

namespace wfmr {
namespace {

void check_depth(int p, int j0) {
  if (j0 < 0 || j0 > p - 1) {
    raise(Errc::InvalidDepth, "j0 = " + std::to_string(j0) + " outside [0, " +
                                  std::to_string(p - 1) + "] for length 2^" + std::to_string(p));
  }
}

// Filter taps start (L/2 - 1) samples before 2k, the periodization phase used
// by PyWavelets, so coefficients agree with it index for index.
std::size_t start_index(std::size_t k, std::size_t n, std::size_t len) {
  const std::size_t back = (len / 2 - 1) % n;
  return (2 * k + n - back) % n;
}

// One periodic analysis step on x[0..n): approximation to out[0..n/2),
// detail to out[n/2..n).
void analysis_step(std::span<const double> x, std::span<double> out, std::span<const double> h,
                   std::span<const double> g) {
  const std::size_t n = x.size();
  const std::size_t half = n / 2;
  const std::size_t len = h.size();
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    std::size_t idx = start_index(k, n, len);
    for (std::size_t m = 0; m < len; ++m) {
      a += h[m] * x[idx];
      d += g[m] * x[idx];
      if (++idx == n) idx = 0;
    }
    out[k] = a;
    out[half + k] = d;
  }
}

// Adjoint of analysis_step.
void synthesis_step(std::span<const double> approx, std::span<const double> detail,
                    std::span<double> x, std::span<const double> h, std::span<const double> g) {
  const std::size_t n = x.size();
  const std::size_t len = h.size();
  std::fill(x.begin(), x.end(), 0.0);
  for (std::size_t k = 0; k < approx.size(); ++k) {
    const double a = approx[k];
    const double d = detail[k];
    std::size_t idx = start_index(k, n, len);
    for (std::size_t m = 0; m < len; ++m) {
      x[idx] += h[m] * a + g[m] * d;
      if (++idx == n) idx = 0;
    }
  }
}

}  // namespace

bool is_dyadic(std::size_t n) noexcept { return n > 0 && std::has_single_bit(n); }

int log2_exact(std::size_t n) {
  if (!is_dyadic(n)) raise(Errc::InvalidLength, "length " + std::to_string(n) + " is not a power of two");
  return std::countr_zero(n);
}

int CoeffVector::depth() const { return log2_exact(values.size()); }

std::span<const double> CoeffVector::scaling() const {
  return std::span<const double>(values).first(std::size_t{1} << j0);
}

std::span<const double> CoeffVector::detail(int level) const {
  check_depth(depth(), level);
  if (level < j0) raise(Errc::InvalidDepth, "detail level below j0");
  return std::span<const double>(values).subspan(detail_offset(level), std::size_t{1} << level);
}

std::span<double> CoeffVector::detail(int level) {
  check_depth(depth(), level);
  if (level < j0) raise(Errc::InvalidDepth, "detail level below j0");
  return std::span<double>(values).subspan(detail_offset(level), std::size_t{1} << level);
}

CoeffVector dwt(std::span<const double> signal, const WaveletSpec& spec) {
  if (signal.size() < 2 || !is_dyadic(signal.size())) {
    raise(Errc::InvalidLength, "dwt needs a dyadic length >= 2, got " + std::to_string(signal.size()));
  }
  const int p = log2_exact(signal.size());
  check_depth(p, spec.j0);

  const auto h = lowpass_filter(spec);
  const auto g = highpass_filter(h);

  CoeffVector out{spec.j0, std::vector<double>(signal.begin(), signal.end())};
  std::vector<double> scratch(signal.size());
  for (int level = p - 1; level >= spec.j0; --level) {
    const std::size_t n = std::size_t{2} << level;
    analysis_step(std::span<const double>(out.values).first(n), std::span<double>(scratch).first(n), h, g);
    std::copy_n(scratch.begin(), n, out.values.begin());
  }
  return out;
}

std::vector<double> idwt(const CoeffVector& coeffs, const WaveletSpec& spec) {
  if (coeffs.size() < 2 || !is_dyadic(coeffs.size())) {
    raise(Errc::InvalidDepth, "coefficient length " + std::to_string(coeffs.size()) + " is not dyadic");
  }
  const int p = log2_exact(coeffs.size());
  check_depth(p, coeffs.j0);
  if (coeffs.j0 != spec.j0) {
    raise(Errc::InvalidDepth, "coefficients carry j0 = " + std::to_string(coeffs.j0) +
                                  " but the wavelet spec has j0 = " + std::to_string(spec.j0));
  }

  const auto h = lowpass_filter(spec);
  const auto g = highpass_filter(h);

  std::vector<double> x = coeffs.values;
  std::vector<double> scratch(x.size());
  for (int level = coeffs.j0; level < p; ++level) {
    const std::size_t half = std::size_t{1} << level;
    auto approx = std::span<const double>(x).first(half);
    auto detail = std::span<const double>(x).subspan(half, half);
    synthesis_step(approx, detail, std::span<double>(scratch).first(2 * half), h, g);
    std::copy_n(scratch.begin(), 2 * half, x.begin());
  }
  return x;
}

DesignMatrix build_design(const std::vector<std::vector<double>>& curves, const WaveletSpec& spec) {
  if (curves.empty()) raise(Errc::InvalidShape, "no curves");
  const std::size_t len = curves.front().size();
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (curves[i].size() != len) {
      raise(Errc::InvalidShape, "curve " + std::to_string(i) + " has length " +
                                    std::to_string(curves[i].size()) + ", expected " + std::to_string(len));
    }
  }
  DesignMatrix z(static_cast<Eigen::Index>(curves.size()), static_cast<Eigen::Index>(len + 1));
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto c = dwt(curves[i], spec);
    const auto row = static_cast<Eigen::Index>(i);
    z(row, 0) = 1.0;
    for (std::size_t q = 0; q < len; ++q) z(row, static_cast<Eigen::Index>(q + 1)) = c.values[q];
  }
  return z;
}

DesignMatrix build_design(const Eigen::MatrixXd& curves, const WaveletSpec& spec) {
  if (curves.rows() == 0) raise(Errc::InvalidShape, "no curves");
  const Eigen::Index len = curves.cols();
  DesignMatrix z(curves.rows(), len + 1);
  std::vector<double> row(static_cast<std::size_t>(len));
  for (Eigen::Index i = 0; i < curves.rows(); ++i) {
    for (Eigen::Index t = 0; t < len; ++t) row[static_cast<std::size_t>(t)] = curves(i, t);
    const auto c = dwt(row, spec);
    z(i, 0) = 1.0;
    for (Eigen::Index q = 0; q < len; ++q) z(i, q + 1) = c.values[static_cast<std::size_t>(q)];
  }
  return z;
}

std::vector<std::vector<double>> reconstruct_omegas(const MixtureParams& params,
                                                    const WaveletSpec& spec) {
  const Eigen::Index len = params.phi.rows() - 1;
  std::vector<std::vector<double>> omegas;
  omegas.reserve(static_cast<std::size_t>(params.components()));
  for (int r = 0; r < params.components(); ++r) {
    const double rho = params.rho(r);
    if (!(rho > 0.0)) raise(Errc::InvalidParams, "rho must be positive to reconstruct omega");
    CoeffVector beta{spec.j0, std::vector<double>(static_cast<std::size_t>(len))};
    for (Eigen::Index q = 0; q < len; ++q) {
      beta.values[static_cast<std::size_t>(q)] = params.phi(q + 1, r) / rho;
    }
    omegas.push_back(idwt(beta, spec));
  }
  return omegas;
}

}  // namespace wfmr
