#include "vpgrav/parallel.hpp"

#include <atomic>
#include <mutex>
#include <cstdlib>

namespace vpgrav {

namespace {
std::atomic<unsigned> g_default_threads{0};
}

void set_default_threads(unsigned n) { g_default_threads.store(n); }

unsigned effective_threads(unsigned requested) {
    if (requested > 0) return requested;
    unsigned d = g_default_threads.load();
    if (d > 0) return d;
    if (const char* env = std::getenv("VPGRAV_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

void parallel_for_chunks(std::size_t n,
                         const std::function<void(std::size_t, std::size_t)>& fn,
                         unsigned threads) {
    if (n == 0) return;
    unsigned nt = std::min<std::size_t>(effective_threads(threads), n);
    if (nt <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::size_t chunk = (n + nt - 1) / nt;
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < nt; ++t) {
        std::size_t lo = static_cast<std::size_t>(t) * chunk;
        if (lo >= n) break;
        std::size_t hi = std::min(n, lo + chunk);
        pool.emplace_back([&, lo, hi] {
            try {
                fn(lo, hi);
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vpgrav
