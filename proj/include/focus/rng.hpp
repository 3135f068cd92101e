#pragma once

// Seedable, splittable random streams.
//
// Every consumer derives its own stream from (seed, key), typically the
// mosaic id, so the values seen by one mosaic never depend on how many other
// mosaics were drawn before it or on which worker thread draws them.
// Bounded draws are done here rather than through <random> distributions,
// whose outputs are implementation-defined and would make manifests differ
// between standard libraries.

#include <cstdint>
#include <random>
#include <string_view>

namespace focus {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::string_view key)
        : engine_(splitmix64(seed ^ splitmix64(fnv1a64(key)))) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        // Rejection sampling over the largest multiple of bound.
        const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound + 1) % bound;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v > limit);
        return v % bound;
    }

    // Uniform float in [0, 1) with 24 bits of resolution.
    float unit_float() { return static_cast<float>(engine_() >> 40) * 0x1.0p-24f; }

private:
    std::mt19937_64 engine_;
};

}  // namespace focus
