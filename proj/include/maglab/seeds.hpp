#pragma once

#include <cstdint>

namespace maglab {

// Stage offsets mixed into the global seed. A stage can be rerun on its own by
// deriving its seed from the same global seed.
inline constexpr std::uint64_t kDataSeedOffset = 0x1000;
inline constexpr std::uint64_t kTrainSeedOffset = 0x2000;
inline constexpr std::uint64_t kEvalSeedOffset = 0x3000;
inline constexpr std::uint64_t kTheorySeedOffset = 0x4000;

// splitmix64 finalizer
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix_seed(seed ^ mix_seed(stream));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return derive_seed(derive_seed(seed, stream), index);
}

}  // namespace maglab
