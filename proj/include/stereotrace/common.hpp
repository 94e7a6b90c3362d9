#pragma once

#include <cstdint>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stereotrace {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Deterministic seeded RNG. Distribution code is hand-rolled so that streams
// are reproducible bit-for-bit independent of the standard library version.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    uint64_t next_u64() {
        // splitmix64
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // integer in [0, n)
    uint64_t index(uint64_t n) { return next_u64() % n; }

    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(2.0 * kPi * u2);
        have_cached_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

    // Independent child stream identified by a tag.
    Rng fork(uint64_t tag) const {
        Rng r(state_ ^ (0xd1b54a32d192ed03ull * (tag + 1)));
        r.next_u64();
        return r;
    }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

inline uint64_t hash_tag(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) { h ^= c; h *= 0x100000001b3ull; }
    return h;
}

// --- deterministic parallelism -------------------------------------------
//
// Work is split into chunks whose boundaries depend only on the problem size,
// never on the thread count. Chunks write disjoint data, so results are
// identical for any number of threads. Reductions go through per-chunk
// partials combined in chunk order.

void set_thread_count(int n);
int thread_count();

// fn(chunk_index, begin, end) over [0, n) split into fixed-size chunks.
void parallel_chunks(int64_t n, int64_t grain,
                     const std::function<void(int64_t, int64_t, int64_t)>& fn);

// Number of chunks used for a given (n, grain); partials buffers are sized with this.
inline int64_t chunk_count(int64_t n, int64_t grain) {
    return grain <= 0 ? 0 : (n + grain - 1) / grain;
}

// Convenience: parallel over items, one call per index.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

// Sum of fn(i) over [0, n) with a fixed per-row partial order.
double parallel_sum(int64_t n, int64_t grain, const std::function<double(int64_t, int64_t)>& chunk_sum);

double median(std::vector<double> v);

}  // namespace stereotrace
