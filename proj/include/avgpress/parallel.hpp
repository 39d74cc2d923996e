#pragma once

#include <cstddef>
#include <functional>

namespace avgpress {

// Default worker count: hardware concurrency, at least 1.
int default_workers();

// Calls fn(i) for i in [0, n) on `workers` threads. Items are claimed in
// index order; every item runs even if another throws, and the exception of
// the lowest failing index is rethrown so failures are reproducible.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace avgpress
