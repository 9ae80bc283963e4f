#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace wfmr {

/// Hardware concurrency, capped by the WFMR_THREADS environment variable.
std::size_t worker_count();

/// Runs body(0..count-1) on up to `workers` threads (0 = worker_count()).
/// Each index runs exactly once; the first exception thrown is rethrown
/// after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t workers = 0);

/// Independent stream seed for replicate `index` (splitmix64 of base ^ index).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

}  // namespace wfmr
