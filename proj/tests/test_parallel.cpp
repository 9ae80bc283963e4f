#include <atomic>
#include <cstdlib>
#include <set>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "wfmr/parallel.hpp"

using namespace wfmr;

TEST(Parallel, EveryIndexOnce) {
  for (std::size_t workers : {1u, 2u, 7u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, [&](std::size_t i) { hits[i]++; }, workers);
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  parallel_for(0, [](std::size_t) { FAIL(); }, 4);
}

TEST(Parallel, RethrowsAfterCompletion) {
  std::atomic<int> done = 0;
  EXPECT_THROW(parallel_for(
                   20,
                   [&](std::size_t i) {
                     done++;
                     if (i == 3) throw std::runtime_error("boom");
                   },
                   3),
               std::runtime_error);
  EXPECT_EQ(done.load(), 20);
}

TEST(Parallel, EnvironmentCap) {
  ::setenv("WFMR_THREADS", "1", 1);
  EXPECT_EQ(worker_count(), 1u);
  ::setenv("WFMR_THREADS", "0", 1);
  EXPECT_GE(worker_count(), 1u);
  ::setenv("WFMR_THREADS", "junk", 1);
  EXPECT_GE(worker_count(), 1u);
  ::unsetenv("WFMR_THREADS");
  EXPECT_GE(worker_count(), 1u);
}

TEST(Parallel, DerivedSeeds) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 1000u);
  EXPECT_EQ(derive_seed(42, 5), derive_seed(42, 5));
  EXPECT_NE(derive_seed(42, 5), derive_seed(43, 5));
}
