#pragma once

#include <cstddef>
#include <functional>

namespace repgeom {

/// Worker count used when a caller passes 0: REPGEOM_THREADS if set, else the
/// hardware concurrency (at least 1).
unsigned default_workers();

/// Resolves a requested worker count (0 = default_workers()).
unsigned resolve_workers(unsigned requested);

/// Runs body(i) for every i in [0, n) on up to `workers` threads.
///
/// Tasks are handed out dynamically, so body must write only to state owned by
/// index i. Results are therefore independent of the worker count. The first
/// exception thrown by any task is rethrown on the calling thread after all
/// workers have stopped.
void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace repgeom
