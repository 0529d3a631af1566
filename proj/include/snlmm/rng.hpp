#pragma once

#include <cstdint>
#include <random>

namespace snlmm {

/// splitmix64 step, used to mix seeds into substream keys.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Deterministic RNG substream derived from a base seed and up to two
/// stream indices (e.g. condition and replication). Streams with distinct
/// keys are independent for Monte Carlo purposes, and the construction does
/// not depend on scheduling order.
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t s1 = 0, std::uint64_t s2 = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (0x9e3779b97f4a7c15ULL + s1));
    h = splitmix64(h ^ (0xc2b2ae3d27d4eb4fULL + s2));
    return std::mt19937_64(h);
}

} // namespace snlmm
