#pragma once

#include <cstdint>
#include <random>

namespace trajlab {

// splitmix64 output mixer. Used only to derive well-separated engine seeds
// from (root seed, stream tag, sample index); draws come from mt19937_64.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Splittable counter scheme: every (root, stream, index) triple maps to an
// independent seed, so per-path generation is order-free and replayable.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t index = 0) {
    std::uint64_t h = splitmix64(root);
    h = splitmix64(h ^ (0xd1b54a32d192ed03ULL * (stream + 1)));
    h = splitmix64(h ^ (0x8cb92ba72f3d8dd7ULL * (index + 1)));
    return h;
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// Stream tags keep sampler families decorrelated under one root seed.
namespace stream {
inline constexpr std::uint64_t brownian = 1;
inline constexpr std::uint64_t walk = 2;
inline constexpr std::uint64_t jumps = 3;
inline constexpr std::uint64_t cir = 4;
inline constexpr std::uint64_t heston = 5;
inline constexpr std::uint64_t fbm = 6;
inline constexpr std::uint64_t mutate = 7;
inline constexpr std::uint64_t splice = 8;
}  // namespace stream

}  // namespace trajlab
