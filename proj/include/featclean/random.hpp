#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace featclean {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to turn (seed, stream ids...) into
/// well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Named sub-streams. Every random consumer derives its engine from the run
/// seed plus one of these tags, so adding a consumer never shifts another.
enum class Stream : std::uint64_t {
    Epoch = 1,
    Jitter = 2,
    VoteTies = 3,
    HocRestart = 4,
    NoiseSymmetric = 5,
    NoiseAsymmetric = 6,
    NoiseInstance = 7,
    BoundMonteCarlo = 8,
};

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream,
                                 std::initializer_list<std::uint64_t> ids = {}) {
    std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(stream)));
    for (std::uint64_t id : ids) h = mix64(h ^ mix64(id + 0x632BE59BD9B4E019ull));
    return h;
}

inline Rng make_rng(std::uint64_t seed, Stream stream, std::initializer_list<std::uint64_t> ids = {}) {
    return Rng(derive_seed(seed, stream, ids));
}

} // namespace featclean
