#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_helpers.hpp"
#include "wfmr/error.hpp"
#include "wfmr/simulate.hpp"
#include "wfmr/tune.hpp"

using namespace wfmr;

namespace {

SimDataset smooth(std::uint64_t seed, std::size_t n_points = 128, std::size_t n = 100,
                  std::vector<double> mixing = {0.5, 0.5}) {
  SimSetting s;
  s.n_points = n_points;
  s.n = n;
  s.mixing = std::move(mixing);
  s.seed = seed;
  return generate_dataset(s);
}

TuneOptions serial_options(std::uint64_t seed = 1) {
  TuneOptions o;
  o.fit.seed = seed;
  o.fold_seed = seed + 1000;
  o.wavelet = WaveletSpec::symmlet(8, 0);
  o.workers = 1;
  return o;
}

TuneRecord record(int c, int j0, double lambda, double crit, bool ok = true) {
  TuneRecord r;
  r.components = c;
  r.j0 = j0;
  r.lambda = lambda;
  r.criterion = crit;
  r.ok = ok;
  return r;
}

}  // namespace

TEST(LambdaGrid, Shape) {
  const auto ds = smooth(1, 64, 80);
  const DesignMatrix z = build_design(ds.curves, WaveletSpec::symmlet(8));
  FitConfig c;
  const auto g = lambda_grid(ds.responses, z, c, 25, 1e-3);
  ASSERT_EQ(g.size(), 25u);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_LT(g[k], g[k - 1]);
  EXPECT_EQ(g.front(), lambda_max(ds.responses, z, c));
  EXPECT_NEAR(g.back() / g.front(), 1e-3, 1e-15);
  EXPECT_THROW(lambda_grid(ds.responses, z, c, 1), Error);
}

TEST(LambdaGrid, DefaultFloor) {
  EXPECT_EQ(default_min_ratio(100, 129), 1e-2);
  EXPECT_EQ(default_min_ratio(129, 129), 1e-2);
  EXPECT_EQ(default_min_ratio(200, 129), 1e-3);
  const auto ds = smooth(2, 128, 100);
  const DesignMatrix z = build_design(ds.curves, WaveletSpec::symmlet(8));
  const auto g = lambda_grid(ds.responses, z, FitConfig{}, 10);
  EXPECT_NEAR(g.back() / g.front(), 1e-2, 1e-14);
}

TEST(LambdaGrid, TopOfGridIsAllZero) {
  const auto ds = smooth(3, 64, 100);
  const DesignMatrix z = build_design(ds.curves, WaveletSpec::symmlet(8));
  FitConfig c;
  c.components = 3;
  const auto g = lambda_grid(ds.responses, z, c, 5);
  for (double scale : {1.0, 1.1}) {
    c.lambda = scale * g.front();
    const auto f = em_fit(ds.responses, z, c);
    EXPECT_EQ(f.q0, 3 * 64);
  }
}

TEST(LambdaGrid, ZeroDesign) {
  DesignMatrix z = DesignMatrix::Zero(10, 5);
  z.col(0).setOnes();
  try {
    lambda_grid(testutil::gaussian_vector(10, 1), z, FitConfig{}, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidDesign);
  }
}

TEST(Bic, EffectiveParameters) {
  EXPECT_EQ(effective_parameters(128, 2, 200), 61.0);
  EXPECT_EQ(effective_parameters(64, 1, 0), 66.0);
}

TEST(Bic, Recomputation) {
  const auto ds = smooth(4, 64, 80);
  const DesignMatrix z = build_design(ds.curves, WaveletSpec::symmlet(8));
  FitConfig c;
  c.lambda = 0.1;
  const auto f = em_fit(ds.responses, z, c);
  const double ll = static_cast<double>(oracle::mixture_loglik(f.params, ds.responses, z));
  int zeros = 0;
  for (Eigen::Index q = 1; q < 65; ++q)
    for (int r = 0; r < 2; ++r) zeros += f.params.phi(q, r) == 0.0;
  const double expected = -2 * ll + std::log(80.0) * (67.0 * 2 - 1 - zeros);
  EXPECT_NEAR(modified_bic(f, 80), expected, 1e-8);
  EXPECT_NEAR(modified_bic(f, 80), predictive_loss(f.params, ds.responses, z) +
                                        std::log(80.0) * effective_parameters(64, 2, f.q0),
              1e-10);
}

TEST(SelectBest, TieRules) {
  std::vector<TuneRecord> recs = {record(2, 0, 0.1, 5.0), record(2, 0, 0.2, 5.0), record(3, 0, 0.2, 5.0),
                                  record(2, 1, 0.2, 5.0), record(1, 0, 0.05, 4.0, false)};
  auto best = select_best(recs);
  EXPECT_EQ(best.lambda, 0.2);
  EXPECT_EQ(best.components, 2);
  EXPECT_EQ(best.j0, 0);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto again = select_best(recs);
    EXPECT_EQ(again.lambda, best.lambda);
    EXPECT_EQ(again.components, best.components);
    EXPECT_EQ(again.j0, best.j0);
  }
  try {
    select_best({record(1, 0, 1.0, 0.0, false)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NumericalFailure);
  }
}

TEST(Folds, Assignment) {
  const auto a = fold_assignment(23, 5, 9);
  EXPECT_EQ(a, fold_assignment(23, 5, 9));
  std::vector<int> counts(5, 0);
  for (int f : a) ++counts[static_cast<std::size_t>(f)];
  EXPECT_EQ(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()), 1);
  EXPECT_THROW(fold_assignment(3, 5, 1), Error);
  EXPECT_THROW(fold_assignment(10, 1, 1), Error);
}

TEST(TuneGrid, Scenarios) {
  const auto g1 = TuneGrid::for_scenario(Scenario::FixCJ0, 128, 2, 3, 50);
  EXPECT_EQ(g1.components, std::vector<int>{2});
  EXPECT_EQ(g1.j0_values, std::vector<int>{3});
  EXPECT_EQ(g1.n_lambda, 50);
  const auto g2 = TuneGrid::for_scenario(Scenario::SelectC, 128, 2, 0);
  EXPECT_EQ(g2.components, (std::vector<int>{1, 2, 3}));
  const auto g3 = TuneGrid::for_scenario(Scenario::SelectJ0, 128, 2, 0);
  EXPECT_EQ(g3.j0_values.size(), 7u);
  TuneGrid bad;
  bad.lambdas = {1.0, 2.0};
  EXPECT_THROW(bad.validate(), Error);
  bad.lambdas = {};
  bad.components = {};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(KFold, LeaveOneOutMatchesClosedForm) {
  const Eigen::Index n = 30;
  CurveData data{testutil::gaussian_matrix(n, 8, 51), Eigen::VectorXd()};
  const DesignMatrix z = build_design(data.curves, WaveletSpec::haar(0));
  data.y = z * testutil::gaussian_vector(9, 52) + testutil::gaussian_vector(n, 53, 0.7);

  TuneGrid grid;
  grid.components = {1};
  grid.lambdas = {0.0};
  TuneOptions o = serial_options();
  o.wavelet = WaveletSpec::haar(0);
  o.folds = static_cast<int>(n);
  o.fit.tol = 1e-30;
  o.fit.max_em_iters = 100000;
  const auto res = kfold_cv(data, grid, o);
  EXPECT_NEAR(res.best.criterion, oracle::ols_loo_loss(z, data.y), 1e-6);
}

TEST(KFold, DeterministicAndAgreesWithBicOnSingleCell) {
  const auto ds = smooth(6, 64, 60);
  TuneGrid grid;
  grid.lambdas = {0.05};
  const auto o = serial_options();
  const auto a = kfold_cv(ds.data(), grid, o);
  const auto b = kfold_cv(ds.data(), grid, o);
  EXPECT_EQ(a.best.criterion, b.best.criterion);
  const auto bic = bic_select(ds.data(), grid, o);
  EXPECT_EQ(a.best.lambda, bic.best.lambda);
  EXPECT_EQ(a.best.components, bic.best.components);
  ASSERT_TRUE(a.best_fit.has_value());
  ASSERT_TRUE(bic.best_fit.has_value());
}

TEST(KFold, ParallelMatchesSerial) {
  const auto ds = smooth(7, 64, 60);
  TuneGrid grid = TuneGrid::for_scenario(Scenario::SelectC, 64, 2, 0, 8);
  auto o = serial_options();
  const auto serial = kfold_cv(ds.data(), grid, o);
  o.workers = 3;
  const auto parallel = kfold_cv(ds.data(), grid, o);
  ASSERT_EQ(serial.records.size(), parallel.records.size());
  for (std::size_t k = 0; k < serial.records.size(); ++k) {
    EXPECT_EQ(serial.records[k].criterion, parallel.records[k].criterion);
  }
}

TEST(Selection, PureArgminOverRecords) {
  const auto ds = smooth(8, 64, 80);
  const auto res = bic_select(ds.data(), TuneGrid::for_scenario(Scenario::SelectC, 64, 2, 0, 15), serial_options());
  EXPECT_EQ(res.records.size(), 45u);
  const auto again = select_best(res.records);
  EXPECT_EQ(again.criterion, res.best.criterion);
  EXPECT_EQ(again.lambda, res.best.lambda);
  for (const auto& r : res.records) {
    if (!r.ok) continue;
    EXPECT_GE(r.criterion, res.best.criterion);
  }
}

TEST(TrainValidateTest, SinglePoint) {
  const auto train = smooth(10, 64, 60), valid = smooth(11, 64, 60), test = smooth(12, 64, 60);
  TuneGrid grid;
  grid.lambdas = {0.07};
  const auto o = serial_options();
  const auto res = train_validate_test(train.data(), valid.data(), test.data(), grid, o);
  EXPECT_EQ(res.best.lambda, 0.07);
  ASSERT_TRUE(res.test_loss.has_value());
  FitConfig c = o.fit;
  c.lambda = 0.07;
  const DesignMatrix zt = build_design(train.curves, o.wavelet);
  const auto f = fit(train.responses, zt, c);
  EXPECT_DOUBLE_EQ(*res.test_loss, predictive_loss(f.params, test.responses, build_design(test.curves, o.wavelet)));
}

TEST(TrainValidateTest, GridOrderIrrelevant) {
  const auto train = smooth(13, 64, 60), valid = smooth(14, 64, 60), test = smooth(15, 64, 60);
  TuneGrid grid;
  grid.components = {1, 2, 3};
  grid.j0_values = {0, 2};
  grid.n_lambda = 8;
  const auto o = serial_options();
  const auto a = train_validate_test(train.data(), valid.data(), test.data(), grid, o);
  grid.components = {3, 1, 2};
  grid.j0_values = {2, 0};
  const auto b = train_validate_test(train.data(), valid.data(), test.data(), grid, o);
  EXPECT_EQ(a.best.components, b.best.components);
  EXPECT_EQ(a.best.j0, b.best.j0);
  EXPECT_EQ(a.best.lambda, b.best.lambda);
  EXPECT_EQ(*a.test_loss, *b.test_loss);
}

TEST(TrainValidateTest, SelectedLambdaInterior) {
  int interior = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto train = smooth(3 * seed + 100), valid = smooth(3 * seed + 101), test = smooth(3 * seed + 102);
    TuneGrid grid;
    grid.n_lambda = 100;
    const auto res = train_validate_test(train.data(), valid.data(), test.data(), grid, serial_options(seed));
    std::vector<double> lambdas;
    for (const auto& r : res.records) lambdas.push_back(r.lambda);
    const auto [lo, hi] = std::minmax_element(lambdas.begin(), lambdas.end());
    interior += res.best.lambda != *lo && res.best.lambda != *hi;
  }
  RecordProperty("interior_runs", interior);
  EXPECT_GE(interior, 16);
}

TEST(SelectComponents, SingleRegressionData) {
  int ones = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto ds = smooth(seed + 500, 128, 100, {1.0});
    const auto res = select_components(ds.data(), TuneGrid::for_scenario(Scenario::SelectC, 128, 2, 0, 30),
                                       SelectionRule::BIC, serial_options(seed));
    ones += res.best.components == 1;
  }
  RecordProperty("c1_runs", ones);
  EXPECT_GT(ones, 10);
}

TEST(SelectComponents, RejectsValidationRule) {
  const auto ds = smooth(1, 32, 30);
  EXPECT_THROW(select_components(ds.data(), TuneGrid{}, SelectionRule::ValidationLoss, serial_options()), Error);
}

TEST(Path, ActiveSetEndpoints) {
  const auto ds = smooth(20, 64, 100, {1.0});
  const DesignMatrix z = build_design(ds.curves, WaveletSpec::symmlet(8));
  FitConfig c;
  c.components = 1;
  const double top = lambda_max(ds.responses, z, c);
  const auto path = fit_path(ds.responses, z, c, {top, 0.0}, false);
  ASSERT_TRUE(path[0] && path[1]);
  EXPECT_GE(path[1]->active_counts[0], path[0]->active_counts[0]);
  EXPECT_EQ(path[0]->active_counts[0], 0);
}

TEST(Path, WarmStartsFollowPath) {
  const auto ds = smooth(21, 64, 80);
  const DesignMatrix z = build_design(ds.curves, WaveletSpec::symmlet(8));
  FitConfig c;
  const auto grid = lambda_grid(ds.responses, z, c, 12);
  std::vector<std::string> failures;
  const auto warm = fit_path(ds.responses, z, c, grid, true, &failures);
  ASSERT_EQ(warm.size(), 12u);
  for (const auto& f : warm) ASSERT_TRUE(f.has_value());
  for (const auto& msg : failures) EXPECT_TRUE(msg.empty());
  const auto cold = fit_path(ds.responses, z, c, grid, false);
  EXPECT_EQ(cold[0]->objective_trace.front(), warm[0]->objective_trace.front());
}

TEST(Rules, Names) {
  EXPECT_EQ(parse_rule("cv5"), SelectionRule::CV5);
  EXPECT_EQ(parse_rule("bic"), SelectionRule::BIC);
  EXPECT_EQ(to_string(SelectionRule::BIC), "bic");
  EXPECT_THROW(parse_rule("aic"), Error);
}
