#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace spadfuse::rng {

// Counter-based random numbers: every draw is a pure function of
// (seed, stream, counter), so any partition of pixels or frames across
// workers reproduces the sequential output exactly.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

/// Uniform in [0, 1) with 53 bits of precision.
constexpr double uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    return static_cast<double>(hash(seed, stream, counter) >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two consecutive counters.
inline double normal(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) noexcept {
    double u1 = uniform(seed, stream, 2 * counter);
    const double u2 = uniform(seed, stream, 2 * counter + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Derives a named sub-stream seed from a root seed, e.g. derive(seed, "spad").
constexpr std::uint64_t derive(std::uint64_t root, const char* name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (const char* p = name; *p != '\0'; ++p) {
        h ^= static_cast<unsigned char>(*p);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(root ^ h);
}

}  // namespace spadfuse::rng
