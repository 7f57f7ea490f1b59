#pragma once

// Deterministic random number generation.
//
// Every stochastic operation in the library draws from a Stream that is
// derived from a 64-bit master seed plus integer tags identifying the task
// (e.g. (seed, fold-split) or (seed, start-index)).  Derivation is a
// splitmix64 hash chain, so results never depend on the order in which
// parallel tasks happen to run.  The generator itself is splitmix64, which
// has a fixed, platform-independent output sequence.

#include <cstdint>
#include <vector>

namespace hazfit {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {
        // burn one round so a zero seed does not start at a fixed point
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    bool next_bernoulli(double p) { return next_double() < p; }

    /// Uniform integer in [0, n).  Rejection sampling, unbiased.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    /// Binomial(n, p) by direct Bernoulli counting.  O(n), exact, and
    /// reproducible across platforms.
    long long next_binomial(long long n, double p) {
        if (p <= 0.0) return 0;
        if (p >= 1.0) return n;
        long long count = 0;
        for (long long i = 0; i < n; ++i)
            if (next_bernoulli(p)) ++count;
        return count;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(next_below(i));
            using std::swap;
            swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

/// Derive a sub-stream from (seed, tags...).  Same inputs always give the
/// same stream.
template <typename... Tags>
Stream derive_stream(std::uint64_t seed, Tags... tags) {
    std::uint64_t s = seed;
    splitmix64(s);
    ((s ^= splitmix64(s) + static_cast<std::uint64_t>(tags)), ...);
    return Stream(s);
}

}  // namespace hazfit
