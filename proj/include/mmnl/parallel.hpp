#ifndef MMNL_PARALLEL_HPP
#define MMNL_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace mmnl {

// 0 or negative -> hardware concurrency.
int resolve_threads(int requested);

// Runs fn(i) for i in [0, n) on up to `threads` workers with static
// chunking. Exceptions are captured and rethrown on the caller's thread.
// Work items must write to disjoint state; the schedule carries no ordering
// guarantees beyond that.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace mmnl

#endif  // MMNL_PARALLEL_HPP
