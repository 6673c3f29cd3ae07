#pragma once

// Deterministic data parallelism: a static chunked parallel_for whose results
// are combined in index order, so the output never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace invariantlab {

namespace detail {
inline std::atomic<int>& worker_budget() {
    static std::atomic<int> budget{0};  // 0 = not set yet
    return budget;
}
}  // namespace detail

inline void set_worker_count(int n) { detail::worker_budget().store(n > 0 ? n : 1); }

inline int worker_count() {
    int n = detail::worker_budget().load();
    if (n > 0) return n;
    if (const char* env = std::getenv("INVARIANTLAB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) {
            set_worker_count(v);
            return v;
        }
    }
    unsigned hw = std::thread::hardware_concurrency();
    n = hw > 0 ? static_cast<int>(hw) : 1;
    set_worker_count(n);
    return n;
}

// Runs body(begin, end) over contiguous chunks of [0, n).  Chunks are fixed
// by n and the worker count alone; each writes only to its own index range.
inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
    if (n <= 0) return;
    int workers = std::min<int64_t>(worker_count(), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        int64_t lo = w * chunk;
        int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        threads.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& t : threads) t.join();
}

}  // namespace invariantlab
