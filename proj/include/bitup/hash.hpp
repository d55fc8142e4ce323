#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace bitup {

inline constexpr uint64_t kIdPartitionSeed = 0x6269747570000001ULL;
inline constexpr uint64_t kTabletSeed = 0x6269747570000002ULL;

// murmur3 64-bit finalizer; a bijection on uint64.
constexpr uint64_t mix64(uint64_t x) noexcept {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ULL;
  x ^= x >> 33;
  return x;
}

inline constexpr uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnvPrime = 0x100000001b3ULL;

/// Seeded FNV-1a with a murmur finalizer. Stable across platforms and runs.
constexpr uint64_t hash_bytes(std::string_view bytes, uint64_t seed) noexcept {
  uint64_t h = kFnvOffset ^ mix64(seed);
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= kFnvPrime;
  }
  return mix64(h);
}

constexpr uint64_t hash_u64(uint64_t value, uint64_t seed) noexcept {
  return mix64(value + mix64(seed));
}

/// Plain FNV-1a over a byte range. Each step is a bijection of the running
/// state, so any single-byte change always changes the result.
constexpr uint64_t checksum64(std::span<const uint8_t> bytes) noexcept {
  uint64_t h = kFnvOffset;
  for (uint8_t b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
  return h;
}

}  // namespace bitup
