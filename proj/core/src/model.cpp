#include "wfmr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "wfmr/error.hpp"

namespace wfmr {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2 pi) / 2
constexpr double kRespFloor = 1e-300;

void check_data(const MixtureParams& params, const Eigen::VectorXd& y, const DesignMatrix& z) {
  if (y.size() != z.rows()) {
    raise(Errc::InvalidShape, "response length " + std::to_string(y.size()) +
                                  " does not match design rows " + std::to_string(z.rows()));
  }
  if (z.cols() != params.coeff_length()) {
    raise(Errc::InvalidShape, "design has " + std::to_string(z.cols()) +
                                  " columns but phi has length " + std::to_string(params.coeff_length()));
  }
}

}  // namespace

void MixtureParams::validate() const {
  const Eigen::Index c = rho.size();
  if (c < 1) raise(Errc::InvalidParams, "at least one component required");
  if (pi.size() != c || phi.cols() != c) raise(Errc::InvalidParams, "component counts disagree");
  if (phi.rows() < 1) raise(Errc::InvalidParams, "phi is empty");
  for (Eigen::Index r = 0; r < c; ++r) {
    if (!(rho(r) > 0.0) || !std::isfinite(rho(r))) raise(Errc::InvalidParams, "rho must be positive");
    if (!(pi(r) > 0.0)) raise(Errc::InvalidParams, "pi must be positive");
  }
  if (std::abs(pi.sum() - 1.0) > 1e-12) raise(Errc::InvalidParams, "pi must sum to one");
}

Eigen::VectorXd MixtureParams::flatten() const {
  const Eigen::Index c = rho.size();
  Eigen::VectorXd out(phi.size() + c + (c - 1));
  out.head(phi.size()) = phi.reshaped();
  out.segment(phi.size(), c) = rho;
  out.tail(c - 1) = pi.head(c - 1);
  return out;
}

MixtureParams MixtureParams::starting(int components, Eigen::Index coeff_length) {
  MixtureParams p;
  p.phi = Eigen::MatrixXd::Zero(coeff_length, components);
  p.rho = Eigen::VectorXd::Constant(components, 2.0);
  p.pi = Eigen::VectorXd::Constant(components, 1.0 / components);
  return p;
}

NaturalParams to_natural(const MixtureParams& params) {
  for (Eigen::Index r = 0; r < params.rho.size(); ++r) {
    if (!(params.rho(r) > 0.0)) raise(Errc::InvalidParams, "rho must be positive");
  }
  NaturalParams out;
  out.sigma = params.rho.cwiseInverse();
  out.beta = params.phi * out.sigma.asDiagonal();
  out.pi = params.pi;
  return out;
}

MixtureParams from_natural(const NaturalParams& natural) {
  for (Eigen::Index r = 0; r < natural.sigma.size(); ++r) {
    if (!(natural.sigma(r) > 0.0)) raise(Errc::InvalidParams, "sigma must be positive");
  }
  MixtureParams out;
  out.rho = natural.sigma.cwiseInverse();
  out.phi = natural.beta * out.rho.asDiagonal();
  out.pi = natural.pi;
  return out;
}

PenaltyWeights uniform_weights(Eigen::Index signal_length, int components) {
  return PenaltyWeights::Ones(signal_length, components);
}

Eigen::MatrixXd component_log_densities(const MixtureParams& params, const Eigen::VectorXd& y,
                                        const DesignMatrix& z) {
  check_data(params, y, z);
  const Eigen::MatrixXd fitted = z * params.phi;  // n x C
  Eigen::MatrixXd out(y.size(), params.components());
  for (int r = 0; r < params.components(); ++r) {
    const double base = std::log(params.pi(r)) + std::log(params.rho(r)) - kHalfLog2Pi;
    const Eigen::ArrayXd resid = params.rho(r) * y.array() - fitted.col(r).array();
    out.col(r) = (base - 0.5 * resid.square()).matrix();
  }
  return out;
}

double log_likelihood(const MixtureParams& params, const Eigen::VectorXd& y, const DesignMatrix& z) {
  const Eigen::MatrixXd logd = component_log_densities(params, y, z);
  double total = 0.0;
  for (Eigen::Index i = 0; i < logd.rows(); ++i) {
    const double m = logd.row(i).maxCoeff();
    total += m + std::log((logd.row(i).array() - m).exp().sum());
  }
  return total;
}

double penalty_term(const MixtureParams& params, const PenaltyWeights& weights, double gamma) {
  const Eigen::Index len = params.coeff_length() - 1;
  if (weights.rows() != len || weights.cols() != params.components()) {
    raise(Errc::InvalidShape, "penalty weights must be N x C");
  }
  double total = 0.0;
  for (int r = 0; r < params.components(); ++r) {
    const double pen =
        (weights.col(r).array() * params.phi.col(r).tail(len).array().abs()).sum();
    if (pen != 0.0) total += std::pow(params.pi(r), gamma) * pen;
  }
  return total;
}

double penalized_objective(const MixtureParams& params, const Eigen::VectorXd& y,
                           const DesignMatrix& z, double lambda, const PenaltyWeights& weights,
                           double gamma) {
  if (!(lambda >= 0.0)) raise(Errc::InvalidPenalty, "lambda must be nonnegative");
  const double n = static_cast<double>(y.size());
  const double nll = -log_likelihood(params, y, z) / n;
  if (lambda == 0.0) return nll;
  return nll + lambda * penalty_term(params, weights, gamma);
}

Responsibilities responsibilities(const MixtureParams& params, const Eigen::VectorXd& y,
                                  const DesignMatrix& z) {
  Eigen::MatrixXd logd = component_log_densities(params, y, z);
  for (Eigen::Index i = 0; i < logd.rows(); ++i) {
    const double m = logd.row(i).maxCoeff();
    logd.row(i) = (logd.row(i).array() - m).exp().max(kRespFloor).matrix();
    logd.row(i) /= logd.row(i).sum();
  }
  return logd;
}

double predictive_loss(const MixtureParams& params, const Eigen::VectorXd& y_new,
                       const DesignMatrix& z_new) {
  return -2.0 * log_likelihood(params, y_new, z_new);
}

}  // namespace wfmr
