#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "wfmr/wavelet.hpp"

namespace {

std::vector<double> noise(std::size_t n) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> dist;
  std::vector<double> x(n);
  for (auto& v : x) v = dist(rng);
  return x;
}

void BM_dwt_sym8(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)));
  const auto spec = wfmr::WaveletSpec::symmlet(8, 0);
  for (auto _ : state) benchmark::DoNotOptimize(wfmr::dwt(x, spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_dwt_sym8)->RangeMultiplier(2)->Range(64, 4096);

void BM_roundtrip_haar(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(state.range(0)));
  const auto spec = wfmr::WaveletSpec::haar(0);
  for (auto _ : state) benchmark::DoNotOptimize(wfmr::idwt(wfmr::dwt(x, spec), spec));
}
BENCHMARK(BM_roundtrip_haar)->RangeMultiplier(4)->Range(64, 4096);

void BM_build_design(benchmark::State& state) {
  const auto n = state.range(0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd curves(100, n);
  for (Eigen::Index i = 0; i < curves.size(); ++i) curves.data()[i] = dist(rng);
  const auto spec = wfmr::WaveletSpec::symmlet(8, 0);
  for (auto _ : state) benchmark::DoNotOptimize(wfmr::build_design(curves, spec));
}
BENCHMARK(BM_build_design)->Arg(128)->Arg(256);

}  // namespace
