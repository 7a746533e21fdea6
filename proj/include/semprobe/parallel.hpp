#pragma once

#include <cstddef>
#include <functional>

namespace semprobe {

// Process-wide worker count used by every parallel stage. Results never
// depend on this value: work is split into fixed items and reductions are
// performed by the caller in item order.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Calls fn(i) for every i in [0, n). Items are distributed over the
// configured threads in contiguous blocks; fn must only write to state
// owned by item i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace semprobe
