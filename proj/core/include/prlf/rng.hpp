#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace prlf {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed for a sub-stream identified by a path of integers, e.g. (master, epoch, sample id).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(master);
    for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double uniform01(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Stream tags so the same (seed, sample) pair never feeds two consumers.
enum class Stream : std::uint64_t {
    init = 1,
    synth = 2,
    synth_sample = 3,
    epoch_mask = 4,
    dropout = 5,
    shuffle = 6,
    eval_mask = 7,
    split = 8,
};

constexpr std::uint64_t stream(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

}  // namespace prlf
