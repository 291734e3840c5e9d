#pragma once

#include <cstddef>
#include <functional>

namespace motiongait {

/// Worker cap: MOTIONGAIT_THREADS when set (a positive integer, else
/// ConfigError), otherwise the hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Every index
/// runs exactly once; if any call throws, the exception from the lowest
/// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace motiongait
