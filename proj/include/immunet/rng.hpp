#pragma once

#include <cstdint>
#include <random>

namespace immunet {

/// Derive a stream seed from a run seed and a purpose tag, so subsystems
/// draw from independent deterministic streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Uniform index in [0, n). Plain modulo: bias is irrelevant at simulation
/// scale and the result is identical across platforms.
inline std::size_t rand_index(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

/// Uniform double in [0, 1).
inline double rand_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Fisher-Yates shuffle with pinned draw order (std::shuffle is not
/// specified bit-for-bit across standard libraries).
template <typename T>
void shuffle_det(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = rand_index(rng, i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace immunet
