#pragma once

#include <cmath>
#include <cstdint>

namespace fekf {

// Counter-based random numbers: every draw is a pure function of a 64-bit
// key, so streams are reproducible regardless of evaluation order or thread
// assignment. splitmix64 is the usual finalizer.

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

/// Uniform double in (0, 1]; never returns 0 so it is safe under log().
inline double uniform_open(std::uint64_t key) {
    return (static_cast<double>(splitmix64(key) >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal draw addressed by (seed, stream, counter) via Box-Muller.
inline double standard_normal(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t counter) {
    const std::uint64_t base = mix_keys(mix_keys(seed, stream), counter);
    const double u1 = uniform_open(base);
    const double u2 = uniform_open(splitmix64(base + 0x632be59bd9b4e019ull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace fekf
