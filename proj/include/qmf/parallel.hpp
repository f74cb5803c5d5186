#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace qmf {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition of [0, n) across workers. fn(worker, begin, end)
// runs on worker-many threads; the first exception is rethrown after join.
// Deterministic output requires fn to write only to per-item or per-worker
// slots, which is how all callers here use it.
template <class Fn>
void parallel_for_blocks(int64_t n, int n_threads, Fn&& fn) {
    n_threads = static_cast<int>(std::max<int64_t>(1, std::min<int64_t>(n_threads, n)));
    if (n <= 0) return;
    if (n_threads == 1) {
        fn(0, int64_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int64_t chunk = (n + n_threads - 1) / n_threads;
    for (int w = 0; w < n_threads; ++w) {
        const int64_t begin = std::min<int64_t>(w * chunk, n);
        const int64_t end = std::min<int64_t>(begin + chunk, n);
        if (begin >= end) break;
        pool.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace qmf
