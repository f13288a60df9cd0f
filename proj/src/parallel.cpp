#include "obeam/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace obeam {

namespace {
std::atomic<unsigned> g_threads{1};
}

void set_thread_count(unsigned n) { g_threads = std::max(1u, n); }
unsigned thread_count() { return g_threads; }

void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(g_threads, nchunks));
    if (workers <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) body(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t c = next++; c < nchunks; c = next++) {
            body(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
}

double parallel_sum(std::size_t n, std::size_t chunk,
                    const std::function<double(std::size_t, std::size_t)>& body) {
    if (n == 0) return 0.0;
    chunk = std::max<std::size_t>(chunk, 1);
    const std::size_t nchunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(nchunks, 0.0);
    parallel_chunks(n, chunk, [&](std::size_t b, std::size_t e) { partial[b / chunk] = body(b, e); });
    double s = 0.0;
    for (double p : partial) s += p;
    return s;
}

}  // namespace obeam
