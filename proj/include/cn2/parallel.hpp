#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace cn2 {

/// Thread budget: explicit request, capped by CN2_PROFILER_THREADS when
/// set, falling back to hardware concurrency.
unsigned resolve_thread_count(unsigned requested, std::size_t jobs);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must
/// be written to pre-sized slots; the schedule is unspecified. Exceptions
/// are captured and the first one rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace cn2
