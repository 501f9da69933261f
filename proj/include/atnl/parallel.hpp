#pragma once

#include <cstddef>
#include <functional>

namespace atnl {

// Worker count for parallel_for. Initialized from the ATNL_THREADS
// environment variable, else hardware concurrency. Thread-count changes only
// move chunk boundaries; every output element is still computed by exactly
// one worker with the same inner summation order, so results are
// bit-identical for any count.
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Runs fn(begin, end) over a partition of [0, n). fn must write disjoint
// outputs per index range. Runs inline when n is small or one thread is
// configured.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_per_thread = 64);

} // namespace atnl
