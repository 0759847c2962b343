#pragma once

#include <cstddef>
#include <functional>

namespace certismooth {

// Runs fn(i) for i in [0, n) across `workers` threads, contiguous chunks.
// Callers own determinism: results must be written to per-index slots or
// merged by a commutative exact reduction.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace certismooth
