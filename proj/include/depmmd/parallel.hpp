#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace depmmd {

inline int default_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static partition of [0, n) into at most `threads` contiguous chunks.
// `body(begin, end)` must only write to locations owned by its range, so the
// result is identical for any thread count; all cross-chunk reductions happen
// afterwards on the caller's thread in fixed order.
inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t chunks =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
    if (chunks <= 1) {
        body(0, n);
        return;
    }
    const std::size_t base = n / chunks;
    const std::size_t rem = n % chunks;
    std::vector<std::thread> workers;
    workers.reserve(chunks - 1);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::size_t begin = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t len = base + (c < rem ? 1 : 0);
        const std::size_t end = begin + len;
        auto run = [&, begin, end]() {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        };
        if (c + 1 == chunks) {
            run();
        } else {
            workers.emplace_back(run);
        }
        begin = end;
    }
    for (auto& w : workers) w.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace depmmd
