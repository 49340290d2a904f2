#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dechw {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a tuple of seed components (node id, round, stream purpose, ...) into
// one well-mixed 64-bit seed. Every consumer of randomness in the simulator
// draws from its own stream derived this way, so execution order and worker
// count cannot change results.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t state = 0x243f6a8885a308d3ULL;  // arbitrary nonzero start
  std::uint64_t out = 0;
  for (std::uint64_t p : parts) {
    state ^= p;
    out = splitmix64(state);
  }
  return out;
}

// Stream purpose tags. Distinct tags keep per-purpose RNG streams independent:
// e.g. a strategy that skips the Hessian estimate consumes nothing from the
// training stream.
namespace stream {
inline constexpr std::uint64_t kModelInit = 0x01;
inline constexpr std::uint64_t kShuffle = 0x02;
inline constexpr std::uint64_t kHessianSubsample = 0x03;
inline constexpr std::uint64_t kSyntheticData = 0x04;
inline constexpr std::uint64_t kPartition = 0x05;
inline constexpr std::uint64_t kTopology = 0x06;
}  // namespace stream

inline std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> parts) {
  return std::mt19937_64(mix_seed(parts));
}

}  // namespace dechw
