#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace hsil {

/// SplitMix64 step; good avalanche, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives a child seed from a root seed and a path of stream labels, so
/// parallel workers get independent, reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
    std::uint64_t state = root ^ 0xd1b54a32d192ed03ULL;
    std::uint64_t out = splitmix64(state);
    for (std::uint64_t label : path) {
        state ^= label + 0x9e3779b97f4a7c15ULL;
        out = splitmix64(state);
    }
    return out;
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

/// Uniform double in [0, 1), independent of the standard library's
/// distribution internals so streams stay stable across toolchains.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller (no pair caching).
inline double normal01(std::mt19937_64& rng) {
    double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

}  // namespace hsil
