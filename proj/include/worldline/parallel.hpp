#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace wl {

/// Worker cap: WL_THREADS if set, else hardware concurrency.
inline unsigned max_threads() {
    static const unsigned n = [] {
        if (const char* env = std::getenv("WL_THREADS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v >= 1) return static_cast<unsigned>(v);
        }
        unsigned hc = std::thread::hardware_concurrency();
        return hc ? hc : 1u;
    }();
    return n;
}

/// Runs fn(begin, end) over contiguous chunks of [0, n) on up to max_threads()
/// workers. Chunk boundaries are deterministic; fn must not share mutable
/// state across chunks.
inline void parallel_chunks(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    unsigned nt = std::min<std::size_t>(max_threads(), n);
    if (nt <= 1 || n < 2) {
        if (n > 0) fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(nt);
    std::size_t chunk = (n + nt - 1) / nt;
    for (unsigned t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace wl
