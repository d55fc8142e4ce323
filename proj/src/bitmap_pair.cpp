#include "bitup/bitmap_pair.hpp"

#include <string>

#include "bitup/error.hpp"

namespace bitup {

SplitUid split_uid(uint64_t uid) {
  if (uid >= kUidLimit) {
    throw Error(ErrorCode::out_of_range, "uid " + std::to_string(uid) + " is outside [0, 2^33)");
  }
  if (uid < kSegmentSpan) return {Segment::low, static_cast<uint32_t>(uid)};
  return {Segment::high, static_cast<uint32_t>(uid - kSegmentSpan)};
}

bool BitmapPair::add(uint64_t uid) {
  auto [segment, offset] = split_uid(uid);
  return segment == Segment::low ? low.add(offset) : high.add(offset);
}

bool BitmapPair::contains(uint64_t uid) const {
  if (uid >= kUidLimit) return false;
  auto [segment, offset] = split_uid(uid);
  return segment == Segment::low ? low.contains(offset) : high.contains(offset);
}

std::vector<uint64_t> BitmapPair::to_uids() const {
  std::vector<uint64_t> out;
  out.reserve(cardinality());
  for (uint32_t v : low) out.push_back(v);
  for (uint32_t v : high) out.push_back(kSegmentSpan + v);
  return out;
}

}  // namespace bitup
