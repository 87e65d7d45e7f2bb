#pragma once

#include <cstddef>
#include <functional>

namespace porl {

// Worker cap: min(hardware threads, PORL_THREADS if set). Always >= 1.
std::size_t thread_cap();

// Runs fn(i) for i in [0, n). Work items must be independent; results must be
// written to disjoint, preallocated slots so the outcome is identical to the
// sequential loop regardless of thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace porl
