#pragma once

#include <cstddef>
#include <functional>

namespace lanegen {

/// Thread count for parallel stages: `requested` if positive, else the
/// LANEGEN_THREADS environment variable, else the machine's parallelism.
int resolve_threads(int requested);

/// Sets the process-wide default used by parallel_for (0 = resolve again).
void set_default_threads(int threads);
int default_threads();

/// Calls fn(i) for i in [0, n) on up to `threads` threads (0 = default).
/// Work is split into contiguous chunks; results must go to per-index slots
/// so output does not depend on scheduling. The first exception thrown is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace lanegen
