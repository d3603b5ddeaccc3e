#pragma once

#include <cstddef>
#include <functional>

namespace evrecon {

/// Process-wide worker count for parallel_for. Defaults to 1; results of every
/// parallel region are independent of the count.
void set_num_threads(int n);
int num_threads();

/// Calls fn(i) for i in [0, n), statically partitioned over num_threads() threads.
/// Rethrows the first exception raised by any call.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace evrecon
