#pragma once

#include <cstddef>
#include <functional>

namespace obeam {

/// Process-wide worker count used by grid kernels. Defaults to 1.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(begin, end) over [0, n) split into fixed chunks of `chunk`
/// items. The chunking does not depend on the thread count, so per-chunk
/// partial results combined in chunk order are bit-identical whether the
/// loop runs on one worker or many.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body);

/// Deterministic sum: each chunk produces a partial, partials are added
/// in chunk order.
double parallel_sum(std::size_t n, std::size_t chunk,
                    const std::function<double(std::size_t, std::size_t)>& body);

}  // namespace obeam
