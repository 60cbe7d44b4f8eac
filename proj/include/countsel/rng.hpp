#pragma once

#include <cstdint>
#include <limits>

namespace countsel {

/// SplitMix64 generator (Steele, Lea & Flood). Satisfies
/// UniformRandomBitGenerator so it plugs into <random> distributions.
/// Each replication owns its own instance seeded with base_seed + index.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t state_;
};

using RandomState = SplitMix64;

}  // namespace countsel
