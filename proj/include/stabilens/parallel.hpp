#pragma once

#include <cstddef>
#include <functional>

namespace stabilens {

/// Worker count: hardware concurrency, capped by STABILENS_THREADS when set.
unsigned worker_count();

/// Runs body(i) for i in [0, n). Iterations must be independent; the call
/// returns after all of them finish and rethrows the first exception.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace stabilens
