#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace pdedpc {

// Runs fn(i) for i in [0, n). Work is fully determined by the index, so the
// results are identical for any thread count; only wall time changes.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    const int workers = std::min(threads, n);
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace pdedpc
