#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace nowcast {

namespace detail {
inline int& thread_limit() {
    static int n = 1;
    return n;
}
}  // namespace detail

inline int max_threads() { return detail::thread_limit(); }
inline void set_max_threads(int n) { detail::thread_limit() = n < 1 ? 1 : n; }

// Runs fn(i) for i in [0, n). Callers write disjoint outputs per i, so the
// result is bit-identical for every thread count.
template <typename F>
void parallel_for(std::int64_t n, F&& fn) {
    const int workers = static_cast<int>(std::min<std::int64_t>(max_threads(), n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = n * w / workers;
        const std::int64_t hi = n * (w + 1) / workers;
        pool.emplace_back([lo, hi, &fn] {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace nowcast
