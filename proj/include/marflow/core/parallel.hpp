#pragma once

#include <cstdint>
#include <functional>

namespace marflow {

// Worker count: MARFLOW_THREADS when set and positive, otherwise the
// hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
// write results to disjoint slots so the outcome is independent of the
// thread count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& body);

}  // namespace marflow
