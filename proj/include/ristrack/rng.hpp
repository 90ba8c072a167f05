// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ristrack
{
    using Rng = std::mt19937_64;

    // SplitMix64 finalizer.
    constexpr std::uint64_t mix64(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Seed derivation used everywhere a random stream is needed:
    //   seed = mix(...mix(mix(master) ^ tag_0) ^ tag_1 ...)
    // Streams with different tag tuples are independent for practical purposes.
    inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags)
    {
        std::uint64_t s = mix64(master);
        for (auto t : tags)
            s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
        return s;
    }

    // Stream tags. Keep stable: they are part of the reproducibility contract.
    namespace stream
    {
        inline constexpr std::uint64_t kTrajectory = 1;
        inline constexpr std::uint64_t kNoise = 2;
        inline constexpr std::uint64_t kPhases = 3;
        inline constexpr std::uint64_t kRandomization = 4;
        inline constexpr std::uint64_t kTrial = 5;
    }
}
