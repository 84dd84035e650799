#pragma once

#include <cstddef>
#include <functional>

namespace carnotflow {

/// Worker count: CARNOTFLOW_THREADS when set and positive, otherwise the
/// hardware concurrency (0 also means auto).
unsigned worker_count();

/// Runs body(i) for i in [0, n) on contiguous static chunks. Each index is
/// visited exactly once, so per-index writes give schedule-independent results.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace carnotflow
