#pragma once

#include <cstddef>
#include <functional>

namespace stgcn {

// STGCN_THREADS when set to a positive integer, else hardware concurrency.
int thread_count();

// Runs fn(0) .. fn(n - 1) on up to `threads` workers. The first exception
// thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = thread_count());

}  // namespace stgcn
