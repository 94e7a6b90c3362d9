#include "stereotrace/common.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

namespace stereotrace {

namespace {
int g_threads = int(std::max(1u, std::thread::hardware_concurrency()));
}

void set_thread_count(int n) { g_threads = std::max(1, n); }
int thread_count() { return g_threads; }

void parallel_chunks(int64_t n, int64_t grain,
                     const std::function<void(int64_t, int64_t, int64_t)>& fn) {
    if (n <= 0) return;
    grain = std::max<int64_t>(1, grain);
    const int64_t nchunks = (n + grain - 1) / grain;
    const int nthreads = int(std::min<int64_t>(g_threads, nchunks));
    if (nthreads <= 1) {
        for (int64_t c = 0; c < nchunks; ++c)
            fn(c, c * grain, std::min(n, (c + 1) * grain));
        return;
    }
    std::atomic<int64_t> next{0};
    auto worker = [&]() {
        for (;;) {
            int64_t c = next.fetch_add(1);
            if (c >= nchunks) break;
            fn(c, c * grain, std::min(n, (c + 1) * grain));
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(size_t(nthreads - 1));
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    // Grain keeps scheduling overhead low while staying thread-count independent.
    const int64_t grain = std::max<int64_t>(1, n / 64);
    parallel_chunks(n, grain, [&](int64_t, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) fn(i);
    });
}

double parallel_sum(int64_t n, int64_t grain,
                    const std::function<double(int64_t, int64_t)>& chunk_sum) {
    if (n <= 0) return 0.0;
    grain = std::max<int64_t>(1, grain);
    std::vector<double> partials(size_t(chunk_count(n, grain)), 0.0);
    parallel_chunks(n, grain, [&](int64_t c, int64_t b, int64_t e) {
        partials[size_t(c)] = chunk_sum(b, e);
    });
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

double median(std::vector<double> v) {
    require(!v.empty(), "median of empty set");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace stereotrace
