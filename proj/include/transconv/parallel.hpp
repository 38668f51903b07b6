#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace transconv {

/// Runs body(chunk_index, begin, end) over a fixed partition of [0, count).
/// The partition does not depend on the worker count, so per-chunk results
/// combined in chunk order are identical for any thread budget.
template <class Body>
void parallel_chunks(std::size_t count, int threads, std::size_t n_chunks, Body&& body) {
    if (count == 0) return;
    if (n_chunks == 0 || n_chunks > count) n_chunks = count;
    const std::size_t base = count / n_chunks;
    const std::size_t extra = count % n_chunks;
    auto chunk_range = [&](std::size_t c) {
        const std::size_t begin = c * base + (c < extra ? c : extra);
        const std::size_t len = base + (c < extra ? 1 : 0);
        return std::pair<std::size_t, std::size_t>(begin, begin + len);
    };
    if (threads <= 1 || n_chunks == 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) {
            auto [b, e] = chunk_range(c);
            body(c, b, e);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            auto [b, e] = chunk_range(c);
            body(c, b, e);
        }
    };
    const int n_workers = static_cast<int>(std::min<std::size_t>(threads, n_chunks));
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

/// Chunked sum reduction; results combine in chunk order regardless of threads.
template <class Body>
double parallel_sum(std::size_t count, int threads, Body&& body) {
    const std::size_t n_chunks = std::min<std::size_t>(count, 64);
    std::vector<double> partial(n_chunks, 0.0);
    parallel_chunks(count, threads, n_chunks, [&](std::size_t c, std::size_t b, std::size_t e) {
        double s = 0.0;
        for (std::size_t i = b; i < e; ++i) s += body(i);
        partial[c] = s;
    });
    double total = 0.0;
    for (double p : partial) total += p;
    return total;
}

/// Chunked min reduction with the same determinism guarantee.
template <class Body>
double parallel_min(std::size_t count, int threads, double init, Body&& body) {
    const std::size_t n_chunks = std::min<std::size_t>(count, 64);
    std::vector<double> partial(n_chunks, init);
    parallel_chunks(count, threads, n_chunks, [&](std::size_t c, std::size_t b, std::size_t e) {
        double m = init;
        for (std::size_t i = b; i < e; ++i) {
            const double v = body(i);
            if (v < m) m = v;
        }
        partial[c] = m;
    });
    double total = init;
    for (double p : partial)
        if (p < total) total = p;
    return total;
}

}  // namespace transconv
