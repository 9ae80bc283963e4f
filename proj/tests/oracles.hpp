#pragma once

// Reference computations that share no code with the library. Slow on purpose.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "wfmr/model.hpp"

namespace oracle {

/// Mixture log-likelihood summed term by term in long double, no log-sum-exp.
inline long double mixture_loglik(const wfmr::MixtureParams& p, const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& z) {
  const long double two_pi = 2.0L * std::numbers::pi_v<long double>;
  long double total = 0.0L;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    long double dens = 0.0L;
    for (int r = 0; r < p.components(); ++r) {
      long double lin = 0.0L;
      for (Eigen::Index q = 0; q < z.cols(); ++q) lin += static_cast<long double>(z(i, q)) * p.phi(q, r);
      const long double u = static_cast<long double>(p.rho(r)) * y(i) - lin;
      dens += static_cast<long double>(p.pi(r)) * p.rho(r) / std::sqrt(two_pi) * std::exp(-0.5L * u * u);
    }
    total += std::log(dens);
  }
  return total;
}

/// Posterior membership by the unstabilized formula.
inline Eigen::MatrixXd direct_responsibilities(const wfmr::MixtureParams& p, const Eigen::VectorXd& y,
                                               const Eigen::MatrixXd& z) {
  Eigen::MatrixXd out(y.size(), p.components());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double sum = 0.0;
    for (int r = 0; r < p.components(); ++r) {
      const double u = p.rho(r) * y(i) - z.row(i).dot(p.phi.col(r));
      out(i, r) = p.pi(r) * p.rho(r) * std::exp(-0.5 * u * u);
      sum += out(i, r);
    }
    out.row(i) /= sum;
  }
  return out;
}

/// Argmin of f on [lo, hi]: dense scan, then repeated zoom around the best point.
inline double grid_argmin(const std::function<double(double)>& f, double lo, double hi, int points = 2001,
                          int rounds = 12) {
  double best = lo;
  for (int round = 0; round < rounds; ++round) {
    double best_val = f(lo);
    best = lo;
    const double step = (hi - lo) / (points - 1);
    for (int k = 1; k < points; ++k) {
      const double x = lo + step * k;
      const double v = f(x);
      if (v < best_val) {
        best_val = v;
        best = x;
      }
    }
    lo = best - 2 * step;
    hi = best + 2 * step;
  }
  return best;
}

/// 0.5 a b^2 + s b + t |b|: the one-coordinate penalized quadratic.
inline double coordinate_objective(double b, double score, double threshold, double norm_sq) {
  return 0.5 * norm_sq * b * b + score * b + threshold * std::abs(b);
}

/// -sum a_r log pi_r + sum pi_r^gamma pen_r.
inline double pi_objective(const std::vector<double>& pi, const std::vector<double>& a,
                           const std::vector<double>& pen, double gamma) {
  double v = 0.0;
  for (std::size_t r = 0; r < pi.size(); ++r) {
    if (pi[r] <= 0.0) return INFINITY;
    v += -a[r] * std::log(pi[r]) + std::pow(pi[r], gamma) * pen[r];
  }
  return v;
}

/// Simplex minimizer of pi_objective for two or three components by grid
/// search with zooming.
inline std::vector<double> simplex_argmin(const std::vector<double>& a, const std::vector<double>& pen,
                                          double gamma) {
  if (a.size() == 2) {
    const double p = grid_argmin([&](double t) { return pi_objective({t, 1 - t}, a, pen, gamma); }, 1e-9,
                                 1 - 1e-9);
    return {p, 1 - p};
  }
  double c0 = 1.0 / 3, c1 = 1.0 / 3, half = 0.5;
  for (int round = 0; round < 40; ++round) {
    double best = INFINITY, b0 = c0, b1 = c1;
    const int m = 60;
    for (int i = -m; i <= m; ++i) {
      for (int j = -m; j <= m; ++j) {
        const double p0 = c0 + half * i / m;
        const double p1 = c1 + half * j / m;
        const double p2 = 1 - p0 - p1;
        if (p0 <= 0 || p1 <= 0 || p2 <= 0) continue;
        const double v = pi_objective({p0, p1, p2}, a, pen, gamma);
        if (v < best) {
          best = v;
          b0 = p0;
          b1 = p1;
        }
      }
    }
    c0 = b0;
    c1 = b1;
    half *= 0.2;
  }
  return {c0, c1, 1 - c0 - c1};
}

/// Ordinary least squares through the normal equations.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd gram = z.transpose() * z;
  return gram.ldlt().solve(z.transpose() * y);
}

/// Leave-one-out Gaussian predictive loss of OLS from the hat matrix:
/// sum_i log(2 pi s_i^2) + r_i^2 / s_i^2 with r_i = e_i / (1 - h_ii) and
/// s_i^2 the MLE residual variance without observation i.
inline double ols_loo_loss(const Eigen::MatrixXd& z, const Eigen::VectorXd& y) {
  const Eigen::Index n = y.size();
  const Eigen::MatrixXd gram_inv = (z.transpose() * z).inverse();
  const Eigen::VectorXd e = y - z * gram_inv * (z.transpose() * y);
  const double rss = e.squaredNorm();
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = z.row(i) * gram_inv * z.row(i).transpose();
    const double r = e(i) / (1 - h);
    const double s2 = (rss - e(i) * e(i) / (1 - h)) / static_cast<double>(n - 1);
    total += std::log(2 * std::numbers::pi * s2) + r * r / s2;
  }
  return total;
}

/// -sum d / rho + sum d (rho y - z phi) y: derivative of the weighted
/// negative log-likelihood in rho.
inline double rho_stationarity(double rho, const Eigen::VectorXd& d, const Eigen::VectorXd& y,
                               const Eigen::MatrixXd& z, const Eigen::VectorXd& phi) {
  double v = -d.sum() / rho;
  for (Eigen::Index i = 0; i < y.size(); ++i) v += d(i) * (rho * y(i) - z.row(i).dot(phi)) * y(i);
  return v;
}

/// Full-depth periodic transform matrix built column by column from the
/// two-scale relations, independent of the pyramid code: row blocks are
/// phi_{j0,k} and psi_{j,k} sampled as filter iterates.
inline Eigen::MatrixXd periodic_basis(const std::vector<double>& h, int p, int j0) {
  const Eigen::Index n = Eigen::Index{1} << p;
  const std::size_t len = h.size();
  std::vector<double> g(len);
  for (std::size_t k = 0; k < len; ++k) g[k] = ((k % 2) ? -1.0 : 1.0) * h[len - 1 - k];
  const std::size_t back = len / 2 - 1;
  // One analysis step as a (m/2 x m) pair of matrices.
  auto step = [&](Eigen::Index m, const std::vector<double>& f) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m / 2, m);
    for (Eigen::Index k = 0; k < m / 2; ++k) {
      for (std::size_t t = 0; t < len; ++t) {
        const auto col = static_cast<Eigen::Index>((static_cast<std::size_t>(2 * k + m * len) - back + t) %
                                                   static_cast<std::size_t>(m));
        a(k, col) += f[t];
      }
    }
    return a;
  };
  Eigen::MatrixXd out(n, n);
  Eigen::MatrixXd approx = Eigen::MatrixXd::Identity(n, n);
  Eigen::Index row = n;
  for (int level = p - 1; level >= j0; --level) {
    const Eigen::Index m = Eigen::Index{2} << level;
    const Eigen::MatrixXd detail = step(m, g) * approx;
    approx = step(m, h) * approx;
    row -= m / 2;
    out.middleRows(row, m / 2) = detail;
  }
  out.topRows(row) = approx;
  return out;
}

}  // namespace oracle
