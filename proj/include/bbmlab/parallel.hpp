#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace bbmlab {

// Runs body(i) for i in [0, n) on `threads` workers. Work items claim
// indices from a shared counter; callers keep determinism by writing into
// per-index slots and merging in index order afterwards.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            body(i);
        }
    };
    std::vector<std::thread> pool;
    const unsigned k = std::min<unsigned>(threads, static_cast<unsigned>(n));
    pool.reserve(k);
    for (unsigned w = 0; w < k; ++w)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
}

inline unsigned default_thread_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

} // namespace bbmlab
