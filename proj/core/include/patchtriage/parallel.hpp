#pragma once

#include <cstddef>
#include <functional>

namespace patchtriage {

/// Worker count used by library-level parallel loops. Defaults to the
/// PATCHTRIAGE_THREADS environment variable, else 1.
int worker_count() noexcept;
void set_worker_count(int n) noexcept;

/// Runs fn(i) for i in [0, n). Each index is processed exactly once; callers
/// write results into index-owned slots so output is independent of the
/// worker count. Exceptions from workers are rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace patchtriage
