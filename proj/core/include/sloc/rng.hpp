#pragma once

#include <cstdint>
#include <random>

namespace sloc {

using Rng = std::mt19937_64;

/// Independent, reproducible substream `stream` of a run seeded with `seed`.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

// Named substreams so that adding a consumer never shifts another one's draws.
namespace streams {
inline constexpr std::uint64_t base_sample = 1;
inline constexpr std::uint64_t sde_noise = 2;
inline constexpr std::uint64_t refresh = 3;
inline constexpr std::uint64_t directions = 4;
inline constexpr std::uint64_t chain = 5;
inline constexpr std::uint64_t pairs = 6;
}  // namespace streams

}  // namespace sloc
