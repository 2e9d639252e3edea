#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace trajgad {

inline constexpr const char* kWorkersEnv = "TRAJGAD_WORKERS";

// Worker count from TRAJGAD_WORKERS, else hardware concurrency.
inline unsigned default_workers() {
    if (const char* env = std::getenv(kWorkersEnv); env != nullptr && *env != '\0') {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<unsigned>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline unsigned resolve_workers(unsigned requested) {
    return requested == 0 ? default_workers() : requested;
}

// Splits [0, n) into contiguous chunks, one per worker. Each index is handled
// by exactly one invocation of fn(begin, end); per-index results therefore do
// not depend on the worker count as long as fn does not reduce across indices.
template <class Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, workers);
    constexpr std::size_t kMinChunk = 256;
    const std::size_t max_useful = std::max<std::size_t>(1, n / kMinChunk);
    const std::size_t chunks = std::min<std::size_t>(workers, max_useful);
    if (chunks <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t step = (n + chunks - 1) / chunks;
    std::vector<std::jthread> pool;
    pool.reserve(chunks - 1);
    for (std::size_t c = 1; c < chunks; ++c) {
        const std::size_t b = std::min(n, c * step);
        const std::size_t e = std::min(n, b + step);
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    fn(std::size_t{0}, std::min(n, step));
}

} // namespace trajgad
