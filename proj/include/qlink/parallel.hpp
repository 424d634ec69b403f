#pragma once

#include <cstddef>
#include <functional>

namespace qlink {

/// Worker cap: QLINK_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Calls fn(i) for i in [0, n) on up to worker_count() threads. fn must be
/// safe to call concurrently for distinct i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace qlink
