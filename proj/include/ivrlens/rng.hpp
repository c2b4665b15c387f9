#pragma once

#include <cstdint>
#include <initializer_list>

namespace ivrlens {

// Deterministic randomness for the whole project.
//
// Everything is derived from a single 64-bit seed through the splitmix64
// finalizer (Steele, Lea & Flood 2014). Draws are counter-based: a draw is
// keyed by (seed, stream fields...) instead of by position in a shared
// stream, so generation order, parallel partitioning, and early stopping do
// not change any value. This is what makes same-seed runs byte-identical
// and keeps common-random-number comparisons aligned per attempt.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += kGolden;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Hash a key of 64-bit fields into one well-mixed word.
inline std::uint64_t mix_key(std::initializer_list<std::uint64_t> fields) {
    std::uint64_t h = 0x8C7F0AAC97C4AA2FULL;
    for (std::uint64_t f : fields) h = splitmix64(h ^ f);
    return h;
}

// Uniform double in [0, 1) with 53 random bits.
inline double u01(std::uint64_t h) { return double(h >> 11) * 0x1.0p-53; }

inline double uniform01(std::initializer_list<std::uint64_t> fields) {
    return u01(mix_key(fields));
}

// Sequential generator over a keyed stream: value i is mix(state, i).
// Used where a variable number of draws is needed (shuffles, init).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ kGolden)) {}
    Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> fields)
        : state_(mix_key(fields) ^ splitmix64(seed)) {}

    std::uint64_t next_u64() { return splitmix64(state_ ^ counter_++); }

    double next_u01() { return u01(next_u64()); }

    // Uniform in [0, n) without modulo bias (Lemire's method).
    std::uint64_t next_below(std::uint64_t n) {
        __uint128_t m = __uint128_t(next_u64()) * n;
        std::uint64_t lo = std::uint64_t(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = __uint128_t(next_u64()) * n;
                lo = std::uint64_t(m);
            }
        }
        return std::uint64_t(m >> 64);
    }

    double next_uniform(double lo, double hi) { return lo + next_u01() * (hi - lo); }

private:
    std::uint64_t state_;
    std::uint64_t counter_ = 0;
};

// Seeded Fisher-Yates; self-contained so shuffles are identical across
// platforms (std::shuffle is implementation-defined).
template <typename Vec>
void deterministic_shuffle(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = std::size_t(rng.next_below(i));
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace ivrlens
