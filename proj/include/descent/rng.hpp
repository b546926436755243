#pragma once

// Every random draw in the project comes from a generator derived from an
// explicit seed and a named purpose, so that independent streams never share
// state and results do not depend on thread scheduling.

#include <cstdint>
#include <random>

namespace descent {

enum class RngPurpose : std::uint64_t {
    Jitter = 1,
    Ordering = 2,
    EvalDraws = 3,
    SubsetSampling = 4,
    Verify = 5,
    MonteCarlo = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed, RngPurpose purpose, std::uint64_t stream = 0) {
    const std::uint64_t mixed =
        splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(purpose) << 56)) + stream);
    return std::mt19937_64(mixed);
}

}  // namespace descent
