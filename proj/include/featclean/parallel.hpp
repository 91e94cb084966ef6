#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace featclean {

/// Resolves a requested thread count; 0 means "all hardware threads".
inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Splits [0, count) into contiguous chunks of `grain` items and hands each
/// chunk index to `fn(chunk, begin, end)`. Chunk boundaries depend only on
/// `count` and `grain`, never on the thread count, so any per-chunk state
/// (RNG streams, partial sums) is reproducible.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t grain, unsigned threads, Fn&& fn) {
    if (count == 0) return;
    grain = std::max<std::size_t>(grain, 1);
    const std::size_t chunks = (count + grain - 1) / grain;
    const unsigned workers =
        static_cast<unsigned>(std::min<std::size_t>(resolve_threads(threads), chunks));

    auto run_chunk = [&](std::size_t c) {
        const std::size_t begin = c * grain;
        fn(c, begin, std::min(count, begin + grain));
    };

    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            // static round-robin assignment
            for (std::size_t c = w; c < chunks; c += workers) {
                try {
                    run_chunk(c);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

} // namespace featclean
