#pragma once

#include <cstdint>
#include <vector>

#include "bitup/bitmap.hpp"

namespace bitup {

inline constexpr uint64_t kSegmentSpan = uint64_t{1} << 32;
/// Numeric ids live in [0, 2^33): two 32-bit segments.
inline constexpr uint64_t kUidLimit = uint64_t{1} << 33;

enum class Segment : uint8_t { low, high };

struct SplitUid {
  Segment segment;
  uint32_t offset;
  friend bool operator==(const SplitUid&, const SplitUid&) = default;
};

/// Routes a uid to its segment. Throws out_of_range for uid >= 2^33.
SplitUid split_uid(uint64_t uid);

constexpr uint64_t join_uid(Segment segment, uint32_t offset) noexcept {
  return segment == Segment::low ? offset : kSegmentSpan + offset;
}

/// Two 32-bit bitmaps jointly covering [0, 2^33). `low` holds uids below 2^32
/// as-is, `high` holds uid - 2^32 for the rest. Set algebra is segment-wise.
struct BitmapPair {
  CompressedBitmap low;
  CompressedBitmap high;

  bool add(uint64_t uid);
  bool contains(uint64_t uid) const;
  uint64_t cardinality() const noexcept { return low.cardinality() + high.cardinality(); }
  bool empty() const noexcept { return low.empty() && high.empty(); }
  std::vector<uint64_t> to_uids() const;

  friend bool operator==(const BitmapPair&, const BitmapPair&) = default;
};

inline BitmapPair operator&(const BitmapPair& a, const BitmapPair& b) {
  return {a.low & b.low, a.high & b.high};
}
inline BitmapPair operator|(const BitmapPair& a, const BitmapPair& b) {
  return {a.low | b.low, a.high | b.high};
}
inline BitmapPair operator^(const BitmapPair& a, const BitmapPair& b) {
  return {a.low ^ b.low, a.high ^ b.high};
}
inline BitmapPair operator-(const BitmapPair& a, const BitmapPair& b) {
  return {a.low - b.low, a.high - b.high};
}

}  // namespace bitup
