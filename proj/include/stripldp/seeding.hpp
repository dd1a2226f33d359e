#pragma once

#include <cstdint>
#include <random>

namespace stripldp {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// Stream seed for (root seed, stream index, sub index).  Every level of a sampled
// environment and every Monte Carlo trial gets its own stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub = 0)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) + sub);
}

inline double unit_from_bits(std::uint64_t bits)
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Stream identifiers.
enum : std::uint64_t {
    kStreamLevels = 0x4c45564cULL,
    kStreamTrials = 0x54524c53ULL,
    kStreamEnvironment = 0x454e5654ULL,
};

} // namespace stripldp
