#pragma once

#include <cstddef>
#include <functional>

namespace ecgsal {

// Process-wide worker count used by parallel_for. 0 selects hardware_concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

// Runs fn(i) for i in [0, n) with contiguous static partitioning. Callers
// must make each fn(i) write only to state owned by index i; results are
// then independent of the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace ecgsal
