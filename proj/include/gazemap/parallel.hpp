#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace gazemap {

/// 0 means one worker per hardware thread.
inline unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, count) into `workers` contiguous blocks and runs fn(begin, end, worker_index)
/// on each. Block boundaries depend only on count and workers.
template <typename Fn>
void parallel_blocks(std::size_t count, unsigned workers, Fn&& fn) {
    workers = std::max(1u, workers);
    if (workers == 1 || count < 2) {
        fn(std::size_t{0}, count, 0u);
        return;
    }
    const auto n = static_cast<std::size_t>(workers);
    std::vector<std::jthread> threads;
    threads.reserve(n - 1);
    for (std::size_t w = 1; w < n; ++w) {
        const std::size_t begin = count * w / n;
        const std::size_t end = count * (w + 1) / n;
        threads.emplace_back([&fn, begin, end, w] { fn(begin, end, static_cast<unsigned>(w)); });
    }
    fn(std::size_t{0}, count / n, 0u);
}

}  // namespace gazemap
