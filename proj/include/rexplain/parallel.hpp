#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rexplain::par {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Kernels that accumulate into per-chunk buffers pay O(buffer) per chunk, so
// the chunk count is capped; 8 keeps reductions cheap and still feeds small
// desk machines.
inline constexpr std::size_t kMaxChunks = 8;

inline std::size_t chunk_count(std::size_t n, std::size_t grain) {
  if (n == 0) return 0;
  if (grain == 0) grain = 1;
  const std::size_t by_grain = (n + grain - 1) / grain;
  return by_grain < kMaxChunks ? by_grain : kMaxChunks;
}

// Runs fn(begin, end, chunk_index) over contiguous chunks of [0, n). Chunk
// boundaries depend only on n and grain, never on the thread count, so
// anything accumulated per chunk and reduced in chunk order gives
// bit-identical results whether OpenMP is enabled or not.
template <class Fn>
void chunked(std::size_t n, std::size_t grain, Fn&& fn) {
  const std::ptrdiff_t chunks = static_cast<std::ptrdiff_t>(chunk_count(n, grain));
  if (chunks == 0) return;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
  for (std::ptrdiff_t c = 0; c < chunks; ++c) {
    const std::size_t begin = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(chunks);
    const std::size_t end =
        n * (static_cast<std::size_t>(c) + 1) / static_cast<std::size_t>(chunks);
    fn(begin, end, static_cast<std::size_t>(c));
  }
}

// Plain parallel loop over independent items; fn(i) must only touch state
// owned by item i.
template <class Fn>
void for_each(std::size_t n, Fn&& fn) {
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(n);
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 8)
#endif
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    fn(static_cast<std::size_t>(i));
  }
}

}  // namespace rexplain::par
