#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace dibs {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a64(const void* bytes, std::size_t n,
                             std::uint64_t h = kFnvOffset) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = kFnvOffset) {
    return fnv1a64(s.data(), s.size(), h);
}

// Counter-based generator (splitmix64 over seed + counter). The whole state
// is (seed, counter), which makes checkpointing a stream trivial and keeps
// every draw independent of library implementations of <random>.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed) {}

    // Derives an independent stream from a base seed and a stream name, so
    // e.g. data shuffling and epsilon draws never share a sequence.
    static RngStream named(std::uint64_t base_seed, std::string_view name) {
        std::uint64_t h = fnv1a64(name);
        h = fnv1a64(&base_seed, sizeof(base_seed), h);
        return RngStream(h);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = seed_ + (++counter_) * 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0,n)
    std::uint64_t uniform_int(std::uint64_t n) { return next_u64() % n; }

    // One standard normal per call via Box-Muller; no cached second value,
    // so the stream state stays a plain counter.
    double normal() {
        double u1 = 1.0 - uniform();  // (0,1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }
    void restore(std::uint64_t seed, std::uint64_t counter) {
        seed_ = seed;
        counter_ = counter;
    }

private:
    std::uint64_t seed_ = 0;
    std::uint64_t counter_ = 0;
};

}  // namespace dibs
