#pragma once

#include <cstddef>
#include <functional>

namespace segwise {

/// Worker count from SEGWISE_THREADS; unset or 0 means hardware concurrency.
std::size_t thread_count();

/// Calls fn(i) for i in [0, count) on up to thread_count() threads. The first
/// exception thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

} // namespace segwise
