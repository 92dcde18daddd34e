#pragma once

#include <cstddef>
#include <functional>

namespace xids {

/// Worker count: XIDS_THREADS when set and positive, otherwise the hardware
/// concurrency (at least 1).
std::size_t default_thread_count();

/// Calls fn(i) for i in [0, n) on up to `threads` workers using a static
/// contiguous partition. fn must only write to state owned by index i.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace xids
