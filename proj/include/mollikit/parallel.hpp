#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace mollikit {

/// Worker cap: MOLLIKIT_THREADS if set (>= 1), otherwise hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("MOLLIKIT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(i) for i in [0, n). Each call must write only to its own output
/// slot; reductions stay deterministic because callers reduce in index order
/// afterwards. `threads` overrides the worker cap (0 = use worker_count()).
template <class Fn>
inline void parallel_for(std::size_t n, Fn&& fn, int threads = 0) {
    int workers = threads > 0 ? threads : worker_count();
    if (workers > static_cast<int>(n)) workers = static_cast<int>(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
}

}  // namespace mollikit
