#include "wfmr/tune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "wfmr/error.hpp"
#include "wfmr/parallel.hpp"

namespace wfmr {
namespace {

// One (C, j0) combination with its lambda values.
struct CellGroup {
  int components = 0;
  int j0 = 0;
  std::vector<double> lambdas;
  std::string failure;
};

FitConfig config_for(const TuneOptions& options, int components) {
  FitConfig cfg = options.fit;
  cfg.components = components;
  return cfg;
}

WaveletSpec spec_for(const TuneOptions& options, int j0) {
  WaveletSpec spec = options.wavelet;
  spec.j0 = j0;
  return spec;
}

std::vector<CellGroup> make_groups(const TuneGrid& grid) {
  std::vector<CellGroup> groups;
  for (int c : grid.components) {
    for (int j0 : grid.j0_values) groups.push_back({c, j0, grid.lambdas, {}});
  }
  return groups;
}

// Fills in data-driven lambda values from the full training data.
void resolve_lambdas(CellGroup& group, const TuneGrid& grid, const Eigen::VectorXd& y, const DesignMatrix& z,
                     const TuneOptions& options) {
  if (!group.lambdas.empty()) return;
  try {
    group.lambdas = lambda_grid(y, z, config_for(options, group.components), grid.n_lambda, grid.lambda_min_ratio);
  } catch (const Error& e) {
    group.failure = e.what();
  }
}

std::vector<Eigen::Index> rows_where(const std::vector<int>& folds, int fold, bool equal) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if ((folds[i] == fold) == equal) rows.push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

DesignMatrix take_rows(const DesignMatrix& z, const std::vector<Eigen::Index>& rows) {
  DesignMatrix out(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = z.row(rows[k]);
  return out;
}

Eigen::VectorXd take_rows(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& rows) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out(static_cast<Eigen::Index>(k)) = y(rows[k]);
  return out;
}

TuneRecord base_record(const CellGroup& group, double lambda) {
  TuneRecord rec;
  rec.components = group.components;
  rec.j0 = group.j0;
  rec.lambda = lambda;
  return rec;
}

void fill_summary(TuneRecord& rec, const FitResult& fit) {
  rec.n_iters = fit.n_iters;
  rec.converged = fit.converged;
  rec.q0 = fit.q0;
  rec.log_likelihood = fit.log_likelihood;
}

void sort_records(std::vector<TuneRecord>& records) {
  std::sort(records.begin(), records.end(), [](const TuneRecord& a, const TuneRecord& b) {
    return std::make_tuple(a.components, a.j0, -a.lambda) < std::make_tuple(b.components, b.j0, -b.lambda);
  });
}

// Refits the path of the selected group on `data` and returns the fit at the
// selected lambda.
std::optional<FitResult> refit_best(const CurveData& data, const std::vector<CellGroup>& groups,
                                    const TuneRecord& best, const TuneOptions& options) {
  for (const auto& group : groups) {
    if (group.components != best.components || group.j0 != best.j0) continue;
    const auto stop = std::find(group.lambdas.begin(), group.lambdas.end(), best.lambda);
    if (stop == group.lambdas.end()) return std::nullopt;
    const auto first = options.warm_start_path ? group.lambdas.begin() : stop;
    const std::vector<double> prefix(first, stop + 1);
    const DesignMatrix z = build_design(data.curves, spec_for(options, group.j0));
    auto path = fit_path(data.y, z, config_for(options, group.components), prefix, options.warm_start_path);
    return path.back();
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(SelectionRule rule) noexcept {
  switch (rule) {
    case SelectionRule::CV5: return "cv5";
    case SelectionRule::BIC: return "bic";
    case SelectionRule::ValidationLoss: return "validation";
  }
  return "unknown";
}

SelectionRule parse_rule(std::string_view name) {
  if (name == "cv5" || name == "cv") return SelectionRule::CV5;
  if (name == "bic") return SelectionRule::BIC;
  if (name == "validation") return SelectionRule::ValidationLoss;
  raise(Errc::InvalidArgument, "unknown selection rule '" + std::string(name) + "'");
}

double default_min_ratio(Eigen::Index n, Eigen::Index columns) noexcept {
  return n <= columns ? 1e-2 : 1e-3;
}

std::vector<double> lambda_grid(const Eigen::VectorXd& y, const DesignMatrix& z, const FitConfig& config,
                                int n_points, double min_ratio) {
  if (n_points < 2) raise(Errc::InvalidArgument, "lambda grid needs at least two points");
  if (min_ratio == 0.0) min_ratio = default_min_ratio(z.rows(), z.cols());
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) raise(Errc::InvalidArgument, "min_ratio must lie in (0, 1)");
  if (z.cols() > 1 && (z.rightCols(z.cols() - 1).array() == 0.0).all()) {
    raise(Errc::InvalidDesign, "all non-intercept design columns are zero");
  }
  const double top = lambda_max(y, z, config);
  std::vector<double> grid(static_cast<std::size_t>(n_points));
  const double step = std::log(min_ratio) / (n_points - 1);
  grid.front() = top;
  for (int k = 1; k < n_points - 1; ++k) grid[static_cast<std::size_t>(k)] = top * std::exp(step * k);
  grid.back() = top * min_ratio;
  return grid;
}

double effective_parameters(Eigen::Index signal_length, int components, int q0) noexcept {
  return static_cast<double>((signal_length + 3) * components - 1 - q0);
}

double modified_bic(const FitResult& fit, Eigen::Index n) {
  const double de = effective_parameters(fit.params.coeff_length() - 1, fit.params.components(), fit.q0);
  return -2.0 * fit.log_likelihood + std::log(static_cast<double>(n)) * de;
}

void TuneGrid::validate() const {
  if (components.empty() || j0_values.empty()) raise(Errc::InvalidArgument, "tuning grid is empty");
  for (int c : components) {
    if (c < 1) raise(Errc::InvalidArgument, "component counts must be >= 1");
  }
  for (std::size_t k = 1; k < lambdas.size(); ++k) {
    if (!(lambdas[k] < lambdas[k - 1])) raise(Errc::InvalidArgument, "lambda values must be strictly descending");
  }
  for (double l : lambdas) {
    if (!(l >= 0.0)) raise(Errc::InvalidPenalty, "lambda values must be nonnegative");
  }
  if (lambdas.empty() && n_lambda < 2) raise(Errc::InvalidArgument, "n_lambda must be >= 2");
}

TuneGrid TuneGrid::for_scenario(Scenario scenario, Eigen::Index signal_length, int fixed_components, int fixed_j0,
                                int n_lambda) {
  TuneGrid grid;
  grid.scenario = scenario;
  grid.n_lambda = n_lambda;
  grid.components = {fixed_components};
  grid.j0_values = {fixed_j0};
  if (scenario == Scenario::SelectC) grid.components = {1, 2, 3};
  if (scenario == Scenario::SelectJ0) {
    grid.j0_values.clear();
    const int depth = log2_exact(static_cast<std::size_t>(signal_length));
    for (int j = 0; j < depth; ++j) grid.j0_values.push_back(j);
  }
  return grid;
}

TuneRecord select_best(const std::vector<TuneRecord>& records) {
  const TuneRecord* best = nullptr;
  for (const auto& rec : records) {
    if (!rec.ok) continue;
    if (best == nullptr ||
        std::make_tuple(rec.criterion, -rec.lambda, rec.components, rec.j0) <
            std::make_tuple(best->criterion, -best->lambda, best->components, best->j0)) {
      best = &rec;
    }
  }
  if (best == nullptr) raise(Errc::NumericalFailure, "every tuning cell failed");
  return *best;
}

std::vector<int> fold_assignment(Eigen::Index n, int k, std::uint64_t seed) {
  if (k < 2 || n < k) raise(Errc::InvalidArgument, "need n >= k >= 2 for cross-validation");
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> folds(static_cast<std::size_t>(n));
  for (std::size_t pos = 0; pos < order.size(); ++pos) folds[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return folds;
}

std::vector<std::optional<FitResult>> fit_path(const Eigen::VectorXd& y, const DesignMatrix& z,
                                               const FitConfig& config, const std::vector<double>& lambdas,
                                               bool warm_start, std::vector<std::string>* failures) {
  std::vector<std::optional<FitResult>> out;
  out.reserve(lambdas.size());
  if (failures) failures->assign(lambdas.size(), {});
  std::optional<MixtureParams> previous;
  FitConfig cfg = config;
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    cfg.lambda = lambdas[k];
    try {
      FitResult result = fit(y, z, cfg, warm_start ? previous : std::nullopt);
      if (warm_start) previous = result.params;
      out.emplace_back(std::move(result));
    } catch (const Error& e) {
      if (failures) (*failures)[k] = e.what();
      out.emplace_back(std::nullopt);
    }
  }
  return out;
}

TuneResult bic_select(const CurveData& data, const TuneGrid& grid, const TuneOptions& options) {
  grid.validate();
  auto groups = make_groups(grid);
  std::vector<std::vector<TuneRecord>> per_group(groups.size());
  std::vector<std::vector<std::optional<FitResult>>> fits(groups.size());

  parallel_for(groups.size(), [&](std::size_t g) {
    auto& group = groups[g];
    const DesignMatrix z = build_design(data.curves, spec_for(options, group.j0));
    resolve_lambdas(group, grid, data.y, z, options);
    if (!group.failure.empty()) return;
    std::vector<std::string> failures;
    fits[g] = fit_path(data.y, z, config_for(options, group.components), group.lambdas, options.warm_start_path,
                       &failures);
    for (std::size_t k = 0; k < group.lambdas.size(); ++k) {
      TuneRecord rec = base_record(group, group.lambdas[k]);
      if (const auto& f = fits[g][k]) {
        rec.criterion = modified_bic(*f, data.size());
        rec.ok = std::isfinite(rec.criterion);
        fill_summary(rec, *f);
      } else {
        rec.failure = failures[k];
      }
      per_group[g].push_back(rec);
    }
  }, options.workers);

  TuneResult result;
  result.rule = SelectionRule::BIC;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].failure.empty()) {
      TuneRecord rec = base_record(groups[g], 0.0);
      rec.failure = groups[g].failure;
      result.records.push_back(rec);
    }
    result.records.insert(result.records.end(), per_group[g].begin(), per_group[g].end());
  }
  sort_records(result.records);
  result.best = select_best(result.records);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].components != result.best.components || groups[g].j0 != result.best.j0) continue;
    for (std::size_t k = 0; k < groups[g].lambdas.size(); ++k) {
      if (groups[g].lambdas[k] == result.best.lambda) result.best_fit = fits[g][k];
    }
  }
  return result;
}

TuneResult kfold_cv(const CurveData& data, const TuneGrid& grid, const TuneOptions& options) {
  grid.validate();
  const int k = options.folds;
  const auto folds = fold_assignment(data.size(), k, options.fold_seed);
  auto groups = make_groups(grid);

  std::vector<DesignMatrix> designs(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) {
    designs[g] = build_design(data.curves, spec_for(options, groups[g].j0));
    resolve_lambdas(groups[g], grid, data.y, designs[g], options);
  }, options.workers);

  // losses[g][f][l]; NaN marks a failed fit.
  const std::size_t units = groups.size() * static_cast<std::size_t>(k);
  std::vector<std::vector<double>> losses(units);
  std::vector<std::vector<std::string>> failures(units);
  parallel_for(units, [&](std::size_t u) {
    const std::size_t g = u / static_cast<std::size_t>(k);
    const int f = static_cast<int>(u % static_cast<std::size_t>(k));
    const auto& group = groups[g];
    if (!group.failure.empty()) return;
    const auto train = rows_where(folds, f, false);
    const auto held = rows_where(folds, f, true);
    const DesignMatrix z_train = take_rows(designs[g], train);
    const DesignMatrix z_held = take_rows(designs[g], held);
    const Eigen::VectorXd y_train = take_rows(data.y, train);
    const Eigen::VectorXd y_held = take_rows(data.y, held);
    const auto path = fit_path(y_train, z_train, config_for(options, group.components), group.lambdas,
                               options.warm_start_path, &failures[u]);
    losses[u].assign(group.lambdas.size(), std::nan(""));
    for (std::size_t l = 0; l < path.size(); ++l) {
      if (path[l]) losses[u][l] = predictive_loss(path[l]->params, y_held, z_held);
    }
  }, options.workers);

  TuneResult result;
  result.rule = SelectionRule::CV5;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (!group.failure.empty()) {
      TuneRecord rec = base_record(group, 0.0);
      rec.failure = group.failure;
      result.records.push_back(rec);
      continue;
    }
    for (std::size_t l = 0; l < group.lambdas.size(); ++l) {
      TuneRecord rec = base_record(group, group.lambdas[l]);
      double total = 0.0;
      for (int f = 0; f < k; ++f) {
        const std::size_t u = g * static_cast<std::size_t>(k) + static_cast<std::size_t>(f);
        total += losses[u][l];
        if (!failures[u][l].empty() && rec.failure.empty()) rec.failure = failures[u][l];
      }
      rec.criterion = total;
      rec.ok = std::isfinite(total);
      result.records.push_back(rec);
    }
  }
  sort_records(result.records);
  result.best = select_best(result.records);
  result.best_fit = refit_best(data, groups, result.best, options);
  if (result.best_fit) fill_summary(result.best, *result.best_fit);
  return result;
}

TuneResult train_validate_test(const CurveData& train, const CurveData& valid, const CurveData& test,
                               const TuneGrid& grid, const TuneOptions& options) {
  grid.validate();
  if (train.signal_length() != valid.signal_length() || train.signal_length() != test.signal_length()) {
    raise(Errc::InvalidShape, "train, validation and test curves must share a length");
  }
  auto groups = make_groups(grid);
  std::vector<std::vector<std::optional<FitResult>>> fits(groups.size());
  std::vector<std::vector<TuneRecord>> per_group(groups.size());

  parallel_for(groups.size(), [&](std::size_t g) {
    auto& group = groups[g];
    const auto spec = spec_for(options, group.j0);
    const DesignMatrix z_train = build_design(train.curves, spec);
    const DesignMatrix z_valid = build_design(valid.curves, spec);
    resolve_lambdas(group, grid, train.y, z_train, options);
    if (!group.failure.empty()) return;
    std::vector<std::string> failures;
    fits[g] = fit_path(train.y, z_train, config_for(options, group.components), group.lambdas,
                       options.warm_start_path, &failures);
    for (std::size_t l = 0; l < group.lambdas.size(); ++l) {
      TuneRecord rec = base_record(group, group.lambdas[l]);
      if (const auto& f = fits[g][l]) {
        rec.criterion = predictive_loss(f->params, valid.y, z_valid);
        rec.ok = std::isfinite(rec.criterion);
        fill_summary(rec, *f);
      } else {
        rec.failure = failures[l];
      }
      per_group[g].push_back(rec);
    }
  }, options.workers);

  TuneResult result;
  result.rule = SelectionRule::ValidationLoss;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!groups[g].failure.empty()) {
      TuneRecord rec = base_record(groups[g], 0.0);
      rec.failure = groups[g].failure;
      result.records.push_back(rec);
    }
    result.records.insert(result.records.end(), per_group[g].begin(), per_group[g].end());
  }
  sort_records(result.records);
  result.best = select_best(result.records);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].components != result.best.components || groups[g].j0 != result.best.j0) continue;
    for (std::size_t l = 0; l < groups[g].lambdas.size(); ++l) {
      if (groups[g].lambdas[l] == result.best.lambda) result.best_fit = fits[g][l];
    }
  }
  if (result.best_fit) {
    const DesignMatrix z_test = build_design(test.curves, spec_for(options, result.best.j0));
    result.test_loss = predictive_loss(result.best_fit->params, test.y, z_test);
  }
  return result;
}

TuneResult select_components(const CurveData& data, const TuneGrid& grid, SelectionRule rule,
                             const TuneOptions& options) {
  if (rule == SelectionRule::ValidationLoss) {
    raise(Errc::InvalidArgument, "component selection uses cv5 or bic");
  }
  TuneGrid g = grid;
  g.scenario = Scenario::SelectC;
  return tune(data, g, rule, options);
}

TuneResult tune(const CurveData& data, const TuneGrid& grid, SelectionRule rule, const TuneOptions& options) {
  switch (rule) {
    case SelectionRule::CV5: return kfold_cv(data, grid, options);
    case SelectionRule::BIC: return bic_select(data, grid, options);
    case SelectionRule::ValidationLoss: break;
  }
  raise(Errc::InvalidArgument, "validation-loss selection needs separate train/validation/test sets");
}

}  // namespace wfmr
