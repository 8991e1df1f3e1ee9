#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace flat::rng {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/// Deterministic per-purpose stream: same root seed + same name -> same
/// stream, independent of every other named stream.
inline std::uint64_t sub_seed(std::uint64_t root, std::string_view name) {
    return splitmix64(root ^ fnv1a(name));
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

/// Standard Gumbel(0,1) draw: -log(-log U), with U bounded away from {0,1}.
inline double gumbel(std::mt19937_64& g) {
    std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
    return -std::log(-std::log(u(g)));
}

inline double uniform01(std::mt19937_64& g) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(g);
}

inline double normal(std::mt19937_64& g, double mean, double stddev) {
    std::normal_distribution<double> n(mean, stddev);
    return n(g);
}

}  // namespace flat::rng
