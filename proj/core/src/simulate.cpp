#include "wfmr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "wfmr/error.hpp"

namespace wfmr {
namespace {

constexpr double kBumpWidth = 20000.0 / 9.0;

double bump(double t, double center) { return std::exp(-kBumpWidth * (t - center) * (t - center)); }

}  // namespace

CoefficientFamily parse_family(std::string_view name) {
  if (name == "smooth") return CoefficientFamily::Smooth;
  if (name == "bumpy") return CoefficientFamily::Bumpy;
  raise(Errc::InvalidArgument, "unknown coefficient family '" + std::string(name) + "'");
}

std::string_view to_string(CoefficientFamily family) noexcept {
  return family == CoefficientFamily::Smooth ? "smooth" : "bumpy";
}

std::vector<double> sampling_grid(std::size_t n_points) {
  std::vector<double> grid(n_points);
  const double denom = static_cast<double>(n_points + 1);
  for (std::size_t j = 0; j < n_points; ++j) grid[j] = static_cast<double>(j + 1) / denom;
  return grid;
}

double bridge_covariance(double s, double t) noexcept {
  return std::min(s, t) * (1.0 - std::max(s, t));
}

BrownianBridge::BrownianBridge(std::span<const double> grid) {
  if (grid.size() < 2) raise(Errc::InvalidArgument, "Brownian bridge needs at least two points");
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    if (!(grid[static_cast<std::size_t>(a)] > 0.0 && grid[static_cast<std::size_t>(a)] < 1.0)) {
      raise(Errc::InvalidGrid, "bridge grid must lie strictly inside (0, 1)");
    }
    for (Eigen::Index b = 0; b < n; ++b) {
      cov(a, b) = bridge_covariance(grid[static_cast<std::size_t>(a)], grid[static_cast<std::size_t>(b)]);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) raise(Errc::NumericalFailure, "bridge covariance is not positive definite");
  factor_ = llt.matrixL();
}

Eigen::VectorXd BrownianBridge::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(factor_.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal(rng);
  return factor_.triangularView<Eigen::Lower>() * z;
}

std::vector<double> brownian_bridge(std::size_t n_points, std::uint64_t seed) {
  const auto grid = sampling_grid(n_points);
  BrownianBridge bridge(grid);
  std::mt19937_64 rng(seed);
  const Eigen::VectorXd x = bridge.sample(rng);
  return {x.data(), x.data() + x.size()};
}

double coefficient_value(CoefficientFamily family, int component, double t) {
  using std::numbers::pi;
  if (family == CoefficientFamily::Smooth) {
    return component == 0 ? -std::sin(2.0 * pi * t) : std::sin(pi * t);
  }
  if (component == 0) {
    return -3.257 * bump(t, 0.15) + 4.886 * bump(t, 0.25) - 3.257 * bump(t, 0.5) + 2.606 * bump(t, 0.9);
  }
  return 3.257 * bump(t, 0.1) - 4.886 * bump(t, 0.35) + 3.257 * bump(t, 0.7);
}

std::vector<std::vector<double>> coefficient_functions(CoefficientFamily family,
                                                       std::span<const double> grid) {
  std::vector<std::vector<double>> out(2, std::vector<double>(grid.size()));
  for (int r = 0; r < 2; ++r) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(grid[j] > 0.0 && grid[j] < 1.0)) raise(Errc::InvalidGrid, "grid must lie inside (0, 1)");
      out[static_cast<std::size_t>(r)][j] = coefficient_value(family, r, grid[j]);
    }
  }
  return out;
}

double signal_variance(std::span<const double> grid, std::span<const double> omega) {
  if (grid.size() != omega.size()) raise(Errc::InvalidShape, "grid and omega lengths differ");
  double total = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double row = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) row += bridge_covariance(grid[j], grid[k]) * omega[k];
    total += omega[j] * row;
  }
  const double n = static_cast<double>(grid.size());
  return total / (n * n);
}

double calibrate_sigma(CoefficientFamily family, std::span<const double> grid, double r2,
                       std::span<const double> mixing) {
  if (!(r2 > 0.0 && r2 < 1.0)) raise(Errc::InvalidTarget, "R^2 target must lie in (0, 1)");
  if (mixing.empty() || mixing.size() > 2) raise(Errc::InvalidArgument, "one or two mixing proportions expected");
  const auto omegas = coefficient_functions(family, grid);
  double mean_var = 0.0;
  for (std::size_t r = 0; r < mixing.size(); ++r) mean_var += mixing[r] * signal_variance(grid, omegas[r]);
  return std::sqrt(mean_var * (1.0 - r2) / r2);
}

void SimSetting::validate() const {
  if (n_points < 2) raise(Errc::InvalidArgument, "need at least two sampling points");
  if (n < 1) raise(Errc::InvalidArgument, "need at least one observation");
  if (!(r2 > 0.0 && r2 < 1.0)) raise(Errc::InvalidTarget, "R^2 target must lie in (0, 1)");
  if (mixing.empty() || mixing.size() > 2) raise(Errc::InvalidArgument, "one or two mixing proportions expected");
  double total = 0.0;
  for (double m : mixing) {
    if (!(m >= 0.0)) raise(Errc::InvalidArgument, "mixing proportions must be nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9) raise(Errc::InvalidArgument, "mixing proportions must sum to one");
  if (!intercepts.empty() && intercepts.size() != mixing.size()) {
    raise(Errc::InvalidArgument, "one intercept per component expected");
  }
}

SimDataset generate_dataset(const SimSetting& setting) {
  setting.validate();
  SimDataset out;
  out.grid = sampling_grid(setting.n_points);
  out.sigma = calibrate_sigma(setting.family, out.grid, setting.r2, setting.mixing);

  const auto omegas = coefficient_functions(setting.family, out.grid);
  const BrownianBridge bridge(out.grid);
  std::mt19937_64 rng(setting.seed);
  std::discrete_distribution<int> pick(setting.mixing.begin(), setting.mixing.end());
  std::normal_distribution<double> noise(0.0, out.sigma);

  const auto n = static_cast<Eigen::Index>(setting.n);
  const auto len = static_cast<Eigen::Index>(setting.n_points);
  const double inv_len = 1.0 / static_cast<double>(setting.n_points);
  out.curves.resize(n, len);
  out.responses.resize(n);
  out.signal.resize(n);
  out.labels.resize(setting.n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int r = pick(rng);
    const Eigen::VectorXd x = bridge.sample(rng);
    const auto& omega = omegas[static_cast<std::size_t>(r)];
    double integral = 0.0;
    for (Eigen::Index j = 0; j < len; ++j) integral += x(j) * omega[static_cast<std::size_t>(j)];
    const double alpha = setting.intercepts.empty() ? 0.0 : setting.intercepts[static_cast<std::size_t>(r)];
    out.curves.row(i) = x.transpose();
    out.signal(i) = alpha + inv_len * integral;
    out.responses(i) = out.signal(i) + noise(rng);
    out.labels[static_cast<std::size_t>(i)] = r + 1;
  }
  return out;
}

double empirical_r2(const SimDataset& dataset) {
  const int c = *std::max_element(dataset.labels.begin(), dataset.labels.end());
  std::vector<double> sum_s(static_cast<std::size_t>(c), 0.0), sum_y(static_cast<std::size_t>(c), 0.0);
  std::vector<double> count(static_cast<std::size_t>(c), 0.0);
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    const auto r = static_cast<std::size_t>(dataset.labels[i] - 1);
    sum_s[r] += dataset.signal(static_cast<Eigen::Index>(i));
    sum_y[r] += dataset.responses(static_cast<Eigen::Index>(i));
    count[r] += 1.0;
  }
  double ss_signal = 0.0, ss_total = 0.0;
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    const auto r = static_cast<std::size_t>(dataset.labels[i] - 1);
    const double ds = dataset.signal(static_cast<Eigen::Index>(i)) - sum_s[r] / count[r];
    const double dy = dataset.responses(static_cast<Eigen::Index>(i)) - sum_y[r] / count[r];
    ss_signal += ds * ds;
    ss_total += dy * dy;
  }
  return ss_signal / ss_total;
}

}  // namespace wfmr
