#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <span>
#include <vector>

namespace bitup {

class ByteWriter;
class ByteReader;

namespace detail {

struct Container;

}  // namespace detail

/// Roaring-style compressed set of 32-bit offsets.
///
/// The value space is split into 2^16 chunks keyed by the high 16 bits. A
/// chunk with at most 4096 members is stored as a sorted array of its low 16
/// bits; a denser chunk is stored as a 65536-bit bitset. Empty chunks are
/// never kept, so two equal sets always have identical container layouts and
/// identical serialized bytes.
///
/// Safe for concurrent readers; mutation requires exclusive access.
class CompressedBitmap {
 public:
  static constexpr uint32_t kArrayLimit = 4096;
  static constexpr std::size_t kBitsetWords = 1024;

  enum class ContainerKind : uint8_t { array = 0, bitset = 1 };

  struct ContainerInfo {
    uint16_t key;
    ContainerKind kind;
    uint32_t cardinality;
  };

  class const_iterator {
   public:
    using iterator_category = std::forward_iterator_tag;
    using value_type = uint32_t;
    using difference_type = std::ptrdiff_t;
    using pointer = const uint32_t*;
    using reference = uint32_t;

    const_iterator() = default;

    uint32_t operator*() const noexcept { return current_; }
    const_iterator& operator++();
    const_iterator operator++(int) {
      auto copy = *this;
      ++*this;
      return copy;
    }
    friend bool operator==(const const_iterator& a, const const_iterator& b) noexcept {
      return a.container_ == b.container_ && a.pos_ == b.pos_;
    }

   private:
    friend class CompressedBitmap;
    const_iterator(const std::vector<detail::Container>* containers, std::size_t container);
    void settle();

    const std::vector<detail::Container>* containers_ = nullptr;
    std::size_t container_ = 0;
    uint32_t pos_ = 0;
    uint32_t current_ = 0;
  };

  CompressedBitmap();
  CompressedBitmap(std::initializer_list<uint32_t> values);
  CompressedBitmap(const CompressedBitmap&);
  CompressedBitmap(CompressedBitmap&&) noexcept;
  CompressedBitmap& operator=(const CompressedBitmap&);
  CompressedBitmap& operator=(CompressedBitmap&&) noexcept;
  ~CompressedBitmap();

  /// Bulk construction from a strictly ascending sequence.
  static CompressedBitmap from_sorted(std::span<const uint32_t> ascending);
  /// Bulk construction from arbitrary values; sorts and deduplicates a copy.
  static CompressedBitmap from_values(std::vector<uint32_t> values);

  /// Returns true when the offset was not already a member.
  bool add(uint32_t offset);
  bool contains(uint32_t offset) const noexcept;

  uint64_t cardinality() const noexcept { return cardinality_; }
  bool empty() const noexcept { return cardinality_ == 0; }

  std::vector<ContainerInfo> containers() const;
  std::vector<uint32_t> to_vector() const;

  const_iterator begin() const;
  const_iterator end() const;

  // Canonical layout: magic "BUPB", u32 container count, then per container
  // u16 key, u8 kind, u32 cardinality and the payload (cardinality u16
  // values for arrays, 1024 u64 words for bitsets). Little-endian.
  std::vector<uint8_t> serialize() const;
  void serialize_to(ByteWriter& out) const;
  std::size_t serialized_size() const noexcept;
  static CompressedBitmap deserialize(std::span<const uint8_t> bytes);

  /// Verifies every structural invariant; used by tests and after decoding.
  bool check_invariants() const;

  friend bool operator==(const CompressedBitmap& a, const CompressedBitmap& b);

  friend CompressedBitmap bitmap_and(const CompressedBitmap& a, const CompressedBitmap& b);
  friend CompressedBitmap bitmap_or(const CompressedBitmap& a, const CompressedBitmap& b);
  friend CompressedBitmap bitmap_xor(const CompressedBitmap& a, const CompressedBitmap& b);
  friend CompressedBitmap bitmap_and_not(const CompressedBitmap& a, const CompressedBitmap& b);

 private:
  void push_container(detail::Container&& c);
  static CompressedBitmap read_from(ByteReader& in, bool require_end);

  std::vector<detail::Container> containers_;
  uint64_t cardinality_ = 0;
};

CompressedBitmap bitmap_and(const CompressedBitmap& a, const CompressedBitmap& b);
CompressedBitmap bitmap_or(const CompressedBitmap& a, const CompressedBitmap& b);
CompressedBitmap bitmap_xor(const CompressedBitmap& a, const CompressedBitmap& b);
CompressedBitmap bitmap_and_not(const CompressedBitmap& a, const CompressedBitmap& b);

inline CompressedBitmap operator&(const CompressedBitmap& a, const CompressedBitmap& b) {
  return bitmap_and(a, b);
}
inline CompressedBitmap operator|(const CompressedBitmap& a, const CompressedBitmap& b) {
  return bitmap_or(a, b);
}
inline CompressedBitmap operator^(const CompressedBitmap& a, const CompressedBitmap& b) {
  return bitmap_xor(a, b);
}
inline CompressedBitmap operator-(const CompressedBitmap& a, const CompressedBitmap& b) {
  return bitmap_and_not(a, b);
}

}  // namespace bitup
