#pragma once

#include <cstddef>
#include <functional>

namespace evoroc {

// 0 means "auto": EVOROC_THREADS if set and non-zero, else hardware concurrency.
std::size_t resolve_threads(std::size_t requested);

// Runs fn(i) for i in [0, n) over contiguous static chunks. Callers write into
// per-index slots, so results never depend on the schedule. The exception of
// the lowest-indexed failing chunk is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace evoroc
