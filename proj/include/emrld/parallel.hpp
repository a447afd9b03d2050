#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace emrld {

/// Worker cap from EMRLD_THREADS (default 20), never below 1.
int default_worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
/// processed exactly once; the first exception thrown is rethrown.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& body);

/// SplitMix64 finalizer; derives independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace emrld
