#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace vpgrav {

// Global worker count used by the data-parallel loops; 0 means hardware default.
unsigned effective_threads(unsigned requested = 0);
void set_default_threads(unsigned n);

// Chunked parallel map over [0, n). fn receives a half-open index range.
// Each index must write only its own output slots, so results do not depend
// on the worker count.
void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn,
                         unsigned threads = 0);

// Convenience per-index form.
template <class F>
void parallel_for(std::size_t n, F&& fn, unsigned threads = 0) {
    parallel_for_chunks(
        n,
        [&fn](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        },
        threads);
}

}  // namespace vpgrav
