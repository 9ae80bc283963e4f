#include <benchmark/benchmark.h>

#include "wfmr/fit.hpp"
#include "wfmr/simulate.hpp"
#include "wfmr/tune.hpp"

namespace {

struct Problem {
  Eigen::VectorXd y;
  wfmr::DesignMatrix z;
};

Problem smooth_problem(std::size_t n_points) {
  wfmr::SimSetting s;
  s.n_points = n_points;
  s.seed = 11;
  const auto ds = wfmr::generate_dataset(s);
  return {ds.responses, wfmr::build_design(ds.curves, wfmr::WaveletSpec::symmlet(8, 0))};
}

void BM_em_fit(benchmark::State& state) {
  const auto p = smooth_problem(static_cast<std::size_t>(state.range(0)));
  wfmr::FitConfig config;
  config.lambda = 0.1 * wfmr::lambda_max(p.y, p.z, config);
  for (auto _ : state) benchmark::DoNotOptimize(wfmr::em_fit(p.y, p.z, config));
}
BENCHMARK(BM_em_fit)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_em_fit_full_sweeps(benchmark::State& state) {
  const auto p = smooth_problem(128);
  wfmr::FitConfig config;
  config.active_set_period = 1;
  config.lambda = 0.1 * wfmr::lambda_max(p.y, p.z, config);
  for (auto _ : state) benchmark::DoNotOptimize(wfmr::em_fit(p.y, p.z, config));
}
BENCHMARK(BM_em_fit_full_sweeps)->Unit(benchmark::kMillisecond);

void BM_lambda_path(benchmark::State& state) {
  const auto p = smooth_problem(128);
  wfmr::FitConfig config;
  const auto grid = wfmr::lambda_grid(p.y, p.z, config, static_cast<int>(state.range(0)));
  const bool warm = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(wfmr::fit_path(p.y, p.z, config, grid, warm));
}
BENCHMARK(BM_lambda_path)->ArgsProduct({{30, 100}, {0, 1}})->ArgNames({"points", "warm"})->Unit(benchmark::kMillisecond);

}  // namespace
