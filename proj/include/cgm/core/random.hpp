#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

namespace cgm {

// The standard distributions are implementation-defined, so the few draws we
// need are written out by hand on top of mt19937_64 to keep outputs
// byte-identical across standard libraries.
using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

/// Seed for an independent stream derived from a base seed and stream indices.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0) {
    return splitmix64(splitmix64(splitmix64(base) ^ a) ^ b);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng &rng) {
    return static_cast<double>(rng() >> 11U) * 0x1.0p-53;
}

inline double uniform(Rng &rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n) by rejection (no modulo bias).
inline std::uint64_t uniform_index(Rng &rng, std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t r = rng();
    while (r >= limit) {
        r = rng();
    }
    return r % n;
}

/// Standard normal via Box-Muller (one value per call, no caching).
inline double normal01(Rng &rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) {
        u1 = uniform01(rng);
    }
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

template <class It> void shuffle(It first, It last, Rng &rng) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
        const auto j = uniform_index(rng, i);
        std::swap(first[i - 1], first[j]);
    }
}

inline std::string rng_state(const Rng &rng) {
    std::ostringstream os;
    os << rng;
    return os.str();
}

inline void set_rng_state(Rng &rng, const std::string &state) {
    std::istringstream is(state);
    is >> rng;
}

} // namespace cgm
