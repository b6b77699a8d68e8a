#pragma once

#include <cstdint>
#include <functional>

namespace senh {

// Worker cap: STEREO_ENHANCE_THREADS if set (clamped to >= 1), otherwise the
// hardware concurrency. Read once per process.
int max_threads();

// Splits [0, n) into at most max_threads() contiguous chunks and runs
// `fn(begin, end)` on each, joining before returning. Chunk boundaries do not
// affect results as long as fn writes only to indices in its own range, so
// outputs are identical for any thread count. Runs inline when a single chunk
// suffices.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace senh
