#pragma once

#include <cstddef>
#include <functional>

namespace mcct::parallel {

/// Worker count for row-parallel loops. 0 selects the hardware concurrency.
void set_threads(unsigned n);
unsigned threads();

/// Rows per block. Blocks, not threads, define reduction order, so results do
/// not depend on the thread count.
inline constexpr std::size_t kBlockRows = 256;

inline std::size_t block_count(std::size_t n, std::size_t block = kBlockRows) {
  return (n + block - 1) / block;
}

/// Calls fn(block_index, begin, end) once per block of [0, n). Blocks may run
/// concurrently; the first exception thrown is rethrown after all workers join.
void for_blocks(std::size_t n, std::size_t block,
                const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace mcct::parallel
