#pragma once

#include <cstddef>
#include <functional>

namespace repspace {

/// Caps the worker count used by parallel_for. 0 means hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous chunks, one
/// per worker; callers write into preallocated per-index slots and reduce
/// sequentially afterwards so results never depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace repspace
