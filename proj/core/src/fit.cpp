#include "wfmr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "wfmr/error.hpp"

namespace wfmr {
namespace {

constexpr double kPiFloor = 1e-8;
constexpr double kDegenerateMass = 1e-6;
constexpr int kDegenerateRun = 20;

using ActiveSets = std::vector<std::vector<Eigen::Index>>;

// Records the largest |S_q| / (n pi_r^gamma w_{r,q}) seen while every
// non-intercept coordinate is held at zero.
struct LambdaProbe {
  double max_ratio = 0.0;
};

struct MStep {
  const Eigen::VectorXd& y;
  const DesignMatrix& z;
  const PenaltyWeights& weights;
  double lambda;
  double gamma;
};

double rho_formula(double ydot, double yy, double mass) {
  return (ydot + std::sqrt(ydot * ydot + 4.0 * yy * mass)) / (2.0 * yy);
}

ActiveSets nonzero_sets(const MixtureParams& p) {
  ActiveSets sets(static_cast<std::size_t>(p.components()));
  for (int r = 0; r < p.components(); ++r) {
    for (Eigen::Index q = 1; q < p.coeff_length(); ++q) {
      if (p.phi(q, r) != 0.0) sets[static_cast<std::size_t>(r)].push_back(q);
    }
  }
  return sets;
}

// Two-stage M-step: pi first, then per component rho, intercept and one
// coordinate-descent sweep over `active` (or every coordinate when null).
void m_step(const MStep& ctx, const Responsibilities& resp, MixtureParams& p, const ActiveSets* active,
            LambdaProbe* probe) {
  const Eigen::Index n = ctx.y.size();
  const Eigen::Index ncoef = ctx.z.cols();
  const double dn = static_cast<double>(n);

  p.pi = update_pi(resp, p.phi, p.pi, ctx.lambda, ctx.weights, ctx.gamma);

  Eigen::VectorXd res(n);
  for (int r = 0; r < p.components(); ++r) {
    const auto d = resp.col(r).array();
    const double mass = d.sum();
    const Eigen::ArrayXd dy = d * ctx.y.array();
    const double yy = (dy * ctx.y.array()).sum();
    if (!(mass > 0.0) || !(yy > 0.0)) continue;

    auto phi = p.phi.col(r);
    const Eigen::VectorXd zphi = ctx.z * phi;
    const double rho = rho_formula((dy * zphi.array()).sum(), yy, mass);

    // Column 0 of the design is all ones.
    const Eigen::ArrayXd rest = zphi.array() - phi(0);
    phi(0) = (rho * dy.sum() - (d * rest).sum()) / mass;
    res = (rho * ctx.y.array() - rest - phi(0)).matrix();

    const double pi_scale = std::pow(p.pi(r), ctx.gamma);
    const double base_threshold = dn * ctx.lambda * pi_scale;
    auto visit = [&](Eigen::Index q) {
      const auto col = ctx.z.col(q).array();
      const double norm_sq = (d * col.square()).sum();
      const double old = phi(q);
      const double score = -(d * col * res.array()).sum() - norm_sq * old;
      const double w = ctx.weights(q - 1, r);
      double updated = 0.0;
      if (probe != nullptr) {
        if (w > 0.0) probe->max_ratio = std::max(probe->max_ratio, std::abs(score) / (dn * pi_scale * w));
      } else {
        updated = coordinate_update(score, base_threshold * w, norm_sq).value;
      }
      if (updated != old) {
        res.array() -= col * (updated - old);
        phi(q) = updated;
      }
    };
    if (active == nullptr) {
      for (Eigen::Index q = 1; q < ncoef; ++q) visit(q);
    } else {
      for (Eigen::Index q : (*active)[static_cast<std::size_t>(r)]) visit(q);
    }
    p.rho(r) = rho;
  }
}

void check_inputs(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config) {
  config.validate();
  if (y.size() != z.rows()) raise(Errc::InvalidShape, "response length does not match design rows");
  if (z.cols() < 2) raise(Errc::InvalidShape, "design needs an intercept and at least one coefficient");
  if (y.size() < config.components) {
    raise(Errc::TooFewObservations, std::to_string(y.size()) + " observations for " +
                                        std::to_string(config.components) + " components");
  }
  if (!y.allFinite() || !z.allFinite()) raise(Errc::InvalidShape, "data contain non-finite values");
}

PenaltyWeights resolve_weights(const DesignMatrix& z, const FitConfig& config,
                               const std::optional<PenaltyWeights>& weights) {
  if (!weights) return uniform_weights(z.cols() - 1, config.components);
  if (weights->rows() != z.cols() - 1 || weights->cols() != config.components) {
    raise(Errc::InvalidShape, "penalty weights must be N x C");
  }
  if (!weights->allFinite() || (weights->array() < 0.0).any()) {
    raise(Errc::InvalidPenalty, "penalty weights must be finite and nonnegative");
  }
  return *weights;
}

InitialState initialize_impl(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                             const PenaltyWeights& weights, LambdaProbe* probe) {
  InitialState state{MixtureParams::starting(config.components, z.cols()),
                     initial_weights(y.size(), config.components, config.seed)};
  const MStep ctx{y, z, weights, probe ? 0.0 : config.lambda, config.gamma};
  m_step(ctx, state.responsibilities, state.params, nullptr, probe);
  return state;
}

FitResult run_em(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                 const PenaltyWeights& weights, const std::optional<MixtureParams>& warm_start,
                 LambdaProbe* probe) {
  const double lambda = probe ? 0.0 : config.lambda;
  const MStep ctx{y, z, weights, lambda, config.gamma};
  const Eigen::Index n = y.size();

  MixtureParams p;
  if (warm_start) {
    p = *warm_start;
    p.validate();
    if (p.components() != config.components || p.coeff_length() != z.cols()) {
      raise(Errc::InvalidShape, "warm start does not match the design or component count");
    }
  } else {
    p = initialize_impl(y, z, config, weights, probe).params;
  }

  FitResult out;
  double objective = penalized_objective(p, y, z, lambda, weights, config.gamma);
  out.objective_trace.push_back(objective);
  if (!std::isfinite(objective)) throw NumericalFailure("objective is not finite after initialization", out.objective_trace);

  ActiveSets active = nonzero_sets(p);
  Eigen::VectorXd previous = p.flatten();
  std::vector<int> low_mass(static_cast<std::size_t>(config.components), 0);
  out.degenerate.assign(static_cast<std::size_t>(config.components), false);
  bool pending_full = false;
  const double param_tol = std::sqrt(config.tol);

  for (int it = 1; it <= config.max_em_iters; ++it) {
    const Responsibilities resp = responsibilities(p, y, z);
    for (int r = 0; r < config.components; ++r) {
      auto& run = low_mass[static_cast<std::size_t>(r)];
      run = resp.col(r).sum() < kDegenerateMass * static_cast<double>(n) ? run + 1 : 0;
      if (run >= kDegenerateRun) out.degenerate[static_cast<std::size_t>(r)] = true;
    }

    const bool full = config.active_set_period <= 1 || it % config.active_set_period == 0 || pending_full;
    m_step(ctx, resp, p, full ? nullptr : &active, probe);
    if (full) {
      active = nonzero_sets(p);
      pending_full = false;
    }

    const double updated = penalized_objective(p, y, z, lambda, weights, config.gamma);
    out.objective_trace.push_back(updated);
    out.n_iters = it;
    if (!std::isfinite(updated)) {
      throw NumericalFailure("objective became non-finite at EM iteration " + std::to_string(it),
                             out.objective_trace);
    }

    const Eigen::VectorXd flat = p.flatten();
    const double rel_obj = std::abs(updated - objective) / (1.0 + std::abs(updated));
    const double rel_par =
        ((flat - previous).array().abs() / (1.0 + flat.array().abs())).maxCoeff();
    objective = updated;
    previous = flat;

    if (rel_obj <= config.tol && rel_par <= param_tol) {
      if (full) {
        out.converged = true;
        break;
      }
      pending_full = true;
    }
  }

  out.responsibilities = responsibilities(p, y, z);
  out.log_likelihood = log_likelihood(p, y, z);
  out.lambda = lambda;
  out.weights = weights;
  out.active_counts.assign(static_cast<std::size_t>(config.components), 0);
  out.q0 = 0;
  for (int r = 0; r < config.components; ++r) {
    for (Eigen::Index q = 1; q < p.coeff_length(); ++q) {
      if (p.phi(q, r) != 0.0) {
        ++out.active_counts[static_cast<std::size_t>(r)];
      } else {
        ++out.q0;
      }
    }
  }
  out.params = std::move(p);
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (components < 1) raise(Errc::InvalidArgument, "component count must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) raise(Errc::InvalidPenalty, "lambda must be finite and nonnegative");
  if (!(tol > 0.0)) raise(Errc::InvalidArgument, "tolerance must be positive");
  if (max_em_iters < 0) raise(Errc::InvalidArgument, "max_em_iters must be nonnegative");
  if (!(adaptive_eps > 0.0)) raise(Errc::InvalidArgument, "adaptive_eps must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) raise(Errc::InvalidArgument, "gamma must lie in [0, 1]");
}

Responsibilities initial_weights(Eigen::Index n, int components, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, components - 1);
  const double total = 0.9 + 0.1 * (components - 1);
  Responsibilities w = Responsibilities::Constant(n, components, 0.1);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, pick(rng)) = 0.9;
    w.row(i) /= total;
  }
  return w;
}

InitialState initialize(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config) {
  check_inputs(y, z, config);
  return initialize_impl(y, z, config, uniform_weights(z.cols() - 1, config.components), nullptr);
}

Eigen::VectorXd simplex_kkt_solution(const Eigen::VectorXd& a, const Eigen::VectorXd& c) {
  const double total = a.sum();
  if ((c.array() == 0.0).all()) return a / total;

  double c_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < a.size(); ++r) {
    if (a(r) > 0.0) c_min = std::min(c_min, c(r));
  }
  auto mass = [&](double nu) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < a.size(); ++r) {
      if (a(r) > 0.0) s += a(r) / (nu + c(r));
    }
    return s;
  };
  // mass() decreases on (-c_min, inf); at total - c_min it is at most one.
  double lo = -c_min;
  double hi = total - c_min;
  for (int i = 0; i < 2000; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (mass(mid) > 1.0 ? lo : hi) = mid;
  }
  const double nu = hi;
  Eigen::VectorXd pi(a.size());
  for (Eigen::Index r = 0; r < a.size(); ++r) pi(r) = a(r) > 0.0 ? a(r) / (nu + c(r)) : 0.0;
  return pi / pi.sum();
}

Eigen::VectorXd update_pi(const Responsibilities& resp, const Eigen::MatrixXd& phi,
                          const Eigen::VectorXd& current_pi, double lambda,
                          const PenaltyWeights& weights, double gamma) {
  if (!(lambda >= 0.0)) raise(Errc::InvalidPenalty, "lambda must be nonnegative");
  const Eigen::Index c = resp.cols();
  const Eigen::VectorXd a = resp.colwise().mean().transpose();

  Eigen::VectorXd slope = Eigen::VectorXd::Zero(c);
  if (lambda > 0.0 && gamma > 0.0) {
    const Eigen::Index len = phi.rows() - 1;
    for (Eigen::Index r = 0; r < c; ++r) {
      const double pen = (weights.col(r).array() * phi.col(r).tail(len).array().abs()).sum();
      if (pen == 0.0) continue;
      slope(r) = gamma == 1.0 ? lambda * pen
                              : lambda * pen * gamma * std::pow(current_pi(r), gamma - 1.0);
    }
  }
  Eigen::VectorXd pi = simplex_kkt_solution(a, slope);
  if ((pi.array() < kPiFloor).any()) {
    pi = pi.cwiseMax(kPiFloor);
    pi /= pi.sum();
  }
  return pi;
}

double update_rho(int r, const Responsibilities& resp, const Eigen::VectorXd& y,
                  const DesignMatrix& z, const Eigen::VectorXd& phi_r) {
  const auto d = resp.col(r).array();
  const double mass = d.sum();
  const double yy = (d * y.array().square()).sum();
  if (!(mass > 0.0) || !(yy > 0.0)) {
    raise(Errc::DegenerateComponent, "component " + std::to_string(r) + " has no weighted response mass");
  }
  const double ydot = (d * y.array() * (z * phi_r).array()).sum();
  return rho_formula(ydot, yy, mass);
}

double update_intercept(int r, const Responsibilities& resp, const Eigen::VectorXd& y,
                        const DesignMatrix& z, double rho, const Eigen::VectorXd& phi_r) {
  const auto d = resp.col(r).array();
  const double mass = d.sum();
  if (!(mass > 0.0)) {
    raise(Errc::DegenerateComponent, "component " + std::to_string(r) + " has zero responsibility mass");
  }
  const Eigen::Index len = z.cols() - 1;
  const Eigen::VectorXd rest = z.rightCols(len) * phi_r.tail(len);
  return (rho * (d * y.array()).sum() - (d * rest.array()).sum()) / mass;
}

double coordinate_score(int r, Eigen::Index q, const Responsibilities& resp,
                        const Eigen::VectorXd& y, const DesignMatrix& z, double rho,
                        const Eigen::VectorXd& phi_r) {
  const auto d = resp.col(r).array();
  const auto zq = z.col(q).array();
  double score = -rho * (d * zq * y.array()).sum();
  for (Eigen::Index s = 0; s < z.cols(); ++s) {
    if (s == q) continue;
    score += phi_r(s) * (d * zq * z.col(s).array()).sum();
  }
  return score;
}

CoordinateStep coordinate_update(double score, double threshold, double column_norm_sq) {
  if (std::abs(score) <= threshold) return {0.0, false};
  if (!(column_norm_sq > 0.0)) return {0.0, true};
  if (score > threshold) return {(threshold - score) / column_norm_sq, false};
  return {-(threshold + score) / column_norm_sq, false};
}

FitResult em_fit(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                 const std::optional<PenaltyWeights>& weights,
                 const std::optional<MixtureParams>& warm_start) {
  check_inputs(y, z, config);
  return run_em(y, z, config, resolve_weights(z, config, weights), warm_start, nullptr);
}

PenaltyWeights adaptive_weights(const MixtureParams& stage1, double eps) {
  if (!(eps > 0.0)) raise(Errc::InvalidArgument, "adaptive_eps must be positive");
  const Eigen::Index len = stage1.coeff_length() - 1;
  return (stage1.phi.bottomRows(len).array().abs() + eps).inverse().matrix();
}

FitResult adaptive_fit(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                       const std::optional<MixtureParams>& warm_start) {
  check_inputs(y, z, config);
  const FitResult stage1 = run_em(y, z, config, uniform_weights(z.cols() - 1, config.components),
                                  warm_start, nullptr);
  const PenaltyWeights w = adaptive_weights(stage1.params, config.adaptive_eps);
  return run_em(y, z, config, w, stage1.params, nullptr);
}

FitResult fit(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
              const std::optional<MixtureParams>& warm_start) {
  if (config.adaptive) return adaptive_fit(y, z, config, warm_start);
  return em_fit(y, z, config, std::nullopt, warm_start);
}

double lambda_max(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                  const std::optional<PenaltyWeights>& weights) {
  check_inputs(y, z, config);
  LambdaProbe probe;
  run_em(y, z, config, resolve_weights(z, config, weights), std::nullopt, &probe);
  if (!(probe.max_ratio > 0.0)) raise(Errc::InvalidDesign, "design carries no signal: lambda_max is zero");
  // Guard against the last-bit difference between |S| / (n pi w) and n lambda pi w.
  return probe.max_ratio * (1.0 + 1e-12);
}

}  // namespace wfmr
