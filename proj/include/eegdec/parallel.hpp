#pragma once

#include <cstddef>
#include <functional>

namespace eegdec {

// Bounded worker pool over [0, n). Results must be keyed by index so the
// outcome is independent of scheduling; the first worker exception is
// rethrown after the pool drains. threads <= 0 means hardware concurrency
// (capped at 8); 1 runs inline.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

} // namespace eegdec
