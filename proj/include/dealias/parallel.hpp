#pragma once

#include <cstddef>
#include <functional>

namespace dealias {

// Worker count from DEALIAS_THREADS, else hardware concurrency (at least 1).
std::size_t DefaultThreadCount();

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must write
// only to their own output slots. If any item throws, the exception of the
// lowest failing index is rethrown after all workers finish.
void ParallelFor(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace dealias
