#include "bitup/bitmap.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <iterator>

#include "bitup/bytes.hpp"
#include "bitup/error.hpp"

namespace bitup {

using Kind = CompressedBitmap::ContainerKind;

namespace detail {

struct Container {
  uint16_t key = 0;
  Kind kind = Kind::array;
  uint32_t cardinality = 0;
  std::vector<uint16_t> values;  // kind == array
  std::vector<uint64_t> words;   // kind == bitset, always kBitsetWords long

  bool contains(uint16_t low) const noexcept {
    if (kind == Kind::array) return std::binary_search(values.begin(), values.end(), low);
    return (words[low >> 6] >> (low & 63)) & 1;
  }

  friend bool operator==(const Container&, const Container&) = default;
};

}  // namespace detail

using detail::Container;

namespace {

constexpr uint32_t kArrayLimit = CompressedBitmap::kArrayLimit;
constexpr std::size_t kWords = CompressedBitmap::kBitsetWords;
constexpr char kMagic[] = "BUPB";

Container array_to_bitset(Container&& c) {
  c.words.assign(kWords, 0);
  for (uint16_t v : c.values) c.words[v >> 6] |= uint64_t{1} << (v & 63);
  c.values.clear();
  c.values.shrink_to_fit();
  c.kind = Kind::bitset;
  return std::move(c);
}

std::vector<uint16_t> words_to_values(const std::vector<uint64_t>& words, uint32_t reserve) {
  std::vector<uint16_t> out;
  out.reserve(reserve);
  for (std::size_t w = 0; w < words.size(); ++w) {
    uint64_t bits = words[w];
    while (bits != 0) {
      out.push_back(static_cast<uint16_t>(w * 64 + std::countr_zero(bits)));
      bits &= bits - 1;
    }
  }
  return out;
}

// Both factories return a container whose kind matches its cardinality;
// a zero-cardinality result is discarded by the caller.
Container make_array(uint16_t key, std::vector<uint16_t> sorted) {
  Container c;
  c.key = key;
  c.cardinality = static_cast<uint32_t>(sorted.size());
  c.values = std::move(sorted);
  if (c.cardinality > kArrayLimit) return array_to_bitset(std::move(c));
  return c;
}

Container make_bitset(uint16_t key, std::vector<uint64_t> words) {
  uint32_t card = 0;
  for (uint64_t w : words) card += static_cast<uint32_t>(std::popcount(w));
  Container c;
  c.key = key;
  c.cardinality = card;
  if (card <= kArrayLimit) {
    c.values = words_to_values(words, card);
  } else {
    c.kind = Kind::bitset;
    c.words = std::move(words);
  }
  return c;
}

bool bit_set(const std::vector<uint64_t>& words, uint16_t v) {
  return (words[v >> 6] >> (v & 63)) & 1;
}

// Skewed sizes: binary-search each small value in the shrinking tail of the
// large side. Otherwise scatter the small side into a scratch bitset and probe
// it with the large side; both passes are free of data-dependent branches.
std::vector<uint16_t> intersect_arrays(const std::vector<uint16_t>& a,
                                       const std::vector<uint16_t>& b) {
  const std::vector<uint16_t>& small = a.size() <= b.size() ? a : b;
  const std::vector<uint16_t>& large = a.size() <= b.size() ? b : a;
  std::vector<uint16_t> out(small.size());
  std::size_t n = 0;
  if (small.size() * 32 < large.size()) {
    auto lo = large.begin();
    for (uint16_t v : small) {
      lo = std::lower_bound(lo, large.end(), v);
      if (lo == large.end()) break;
      out[n] = v;
      n += *lo == v;
    }
  } else {
    thread_local std::array<uint64_t, kWords> scratch{};
    for (uint16_t v : small) scratch[v >> 6] |= uint64_t{1} << (v & 63);
    uint16_t* o = out.data();
    for (uint16_t v : large) {
      o[n] = v;
      n += (scratch[v >> 6] >> (v & 63)) & 1;
      if (n == small.size()) break;
    }
    for (uint16_t v : small) scratch[v >> 6] = 0;
  }
  out.resize(n);
  return out;
}

Container container_and(const Container& a, const Container& b) {
  if (a.kind == Kind::array && b.kind == Kind::array) {
    return make_array(a.key, intersect_arrays(a.values, b.values));
  }
  if (a.kind == Kind::bitset && b.kind == Kind::bitset) {
    std::vector<uint64_t> w(kWords);
    for (std::size_t i = 0; i < kWords; ++i) w[i] = a.words[i] & b.words[i];
    return make_bitset(a.key, std::move(w));
  }
  const Container& arr = a.kind == Kind::array ? a : b;
  const Container& bits = a.kind == Kind::array ? b : a;
  std::vector<uint16_t> out;
  out.reserve(arr.values.size());
  for (uint16_t v : arr.values) {
    if (bit_set(bits.words, v)) out.push_back(v);
  }
  return make_array(a.key, std::move(out));
}

Container container_or(const Container& a, const Container& b) {
  if (a.kind == Kind::array && b.kind == Kind::array) {
    std::vector<uint16_t> out;
    out.reserve(a.values.size() + b.values.size());
    std::set_union(a.values.begin(), a.values.end(), b.values.begin(), b.values.end(),
                   std::back_inserter(out));
    return make_array(a.key, std::move(out));
  }
  if (a.kind == Kind::bitset && b.kind == Kind::bitset) {
    std::vector<uint64_t> w(kWords);
    for (std::size_t i = 0; i < kWords; ++i) w[i] = a.words[i] | b.words[i];
    return make_bitset(a.key, std::move(w));
  }
  const Container& arr = a.kind == Kind::array ? a : b;
  const Container& bits = a.kind == Kind::array ? b : a;
  std::vector<uint64_t> w = bits.words;
  for (uint16_t v : arr.values) w[v >> 6] |= uint64_t{1} << (v & 63);
  return make_bitset(a.key, std::move(w));
}

Container container_xor(const Container& a, const Container& b) {
  if (a.kind == Kind::array && b.kind == Kind::array) {
    std::vector<uint16_t> out;
    out.reserve(a.values.size() + b.values.size());
    std::set_symmetric_difference(a.values.begin(), a.values.end(), b.values.begin(),
                                  b.values.end(), std::back_inserter(out));
    return make_array(a.key, std::move(out));
  }
  if (a.kind == Kind::bitset && b.kind == Kind::bitset) {
    std::vector<uint64_t> w(kWords);
    for (std::size_t i = 0; i < kWords; ++i) w[i] = a.words[i] ^ b.words[i];
    return make_bitset(a.key, std::move(w));
  }
  const Container& arr = a.kind == Kind::array ? a : b;
  const Container& bits = a.kind == Kind::array ? b : a;
  std::vector<uint64_t> w = bits.words;
  for (uint16_t v : arr.values) w[v >> 6] ^= uint64_t{1} << (v & 63);
  return make_bitset(a.key, std::move(w));
}

Container container_and_not(const Container& a, const Container& b) {
  if (a.kind == Kind::array) {
    std::vector<uint16_t> out;
    out.reserve(a.values.size());
    if (b.kind == Kind::array) {
      std::set_difference(a.values.begin(), a.values.end(), b.values.begin(), b.values.end(),
                          std::back_inserter(out));
    } else {
      for (uint16_t v : a.values) {
        if (!bit_set(b.words, v)) out.push_back(v);
      }
    }
    return make_array(a.key, std::move(out));
  }
  std::vector<uint64_t> w = a.words;
  if (b.kind == Kind::array) {
    for (uint16_t v : b.values) w[v >> 6] &= ~(uint64_t{1} << (v & 63));
  } else {
    for (std::size_t i = 0; i < kWords; ++i) w[i] &= ~b.words[i];
  }
  return make_bitset(a.key, std::move(w));
}

// Merge-walk over the two container lists. Containers present in only one
// input are copied when the operation keeps them.
template <class Op>
CompressedBitmap combine(const std::vector<Container>& a, const std::vector<Container>& b,
                         bool keep_left_only, bool keep_right_only, Op op,
                         void (*push)(CompressedBitmap&, Container&&)) {
  CompressedBitmap out;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].key < b[j].key) {
      if (keep_left_only) push(out, Container(a[i]));
      ++i;
    } else if (b[j].key < a[i].key) {
      if (keep_right_only) push(out, Container(b[j]));
      ++j;
    } else {
      push(out, op(a[i], b[j]));
      ++i;
      ++j;
    }
  }
  if (keep_left_only) {
    for (; i < a.size(); ++i) push(out, Container(a[i]));
  }
  if (keep_right_only) {
    for (; j < b.size(); ++j) push(out, Container(b[j]));
  }
  return out;
}

}  // namespace

CompressedBitmap::CompressedBitmap() = default;
CompressedBitmap::CompressedBitmap(const CompressedBitmap&) = default;
CompressedBitmap::CompressedBitmap(CompressedBitmap&&) noexcept = default;
CompressedBitmap& CompressedBitmap::operator=(const CompressedBitmap&) = default;
CompressedBitmap& CompressedBitmap::operator=(CompressedBitmap&&) noexcept = default;
CompressedBitmap::~CompressedBitmap() = default;

CompressedBitmap::CompressedBitmap(std::initializer_list<uint32_t> values)
    : CompressedBitmap(from_values(std::vector<uint32_t>(values))) {}

CompressedBitmap CompressedBitmap::from_sorted(std::span<const uint32_t> ascending) {
  CompressedBitmap out;
  std::size_t i = 0;
  while (i < ascending.size()) {
    const uint16_t key = static_cast<uint16_t>(ascending[i] >> 16);
    std::vector<uint16_t> low;
    std::size_t j = i;
    for (; j < ascending.size() && (ascending[j] >> 16) == key; ++j) {
      if (j > i && ascending[j] <= ascending[j - 1]) {
        throw Error(ErrorCode::invalid_argument, "from_sorted: input not strictly ascending");
      }
      low.push_back(static_cast<uint16_t>(ascending[j] & 0xFFFF));
    }
    if (j < ascending.size() && ascending[j] < ascending[j - 1]) {
      throw Error(ErrorCode::invalid_argument, "from_sorted: input not strictly ascending");
    }
    out.push_container(make_array(key, std::move(low)));
    i = j;
  }
  return out;
}

CompressedBitmap CompressedBitmap::from_values(std::vector<uint32_t> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return from_sorted(values);
}

void CompressedBitmap::push_container(Container&& c) {
  if (c.cardinality == 0) return;
  cardinality_ += c.cardinality;
  containers_.push_back(std::move(c));
}

bool CompressedBitmap::add(uint32_t offset) {
  const uint16_t key = static_cast<uint16_t>(offset >> 16);
  const uint16_t low = static_cast<uint16_t>(offset & 0xFFFF);
  auto it = std::lower_bound(containers_.begin(), containers_.end(), key,
                             [](const Container& c, uint16_t k) { return c.key < k; });
  if (it == containers_.end() || it->key != key) {
    Container c;
    c.key = key;
    c.cardinality = 1;
    c.values.push_back(low);
    containers_.insert(it, std::move(c));
    ++cardinality_;
    return true;
  }
  if (it->kind == Kind::bitset) {
    uint64_t& word = it->words[low >> 6];
    const uint64_t mask = uint64_t{1} << (low & 63);
    if (word & mask) return false;
    word |= mask;
  } else {
    auto pos = std::lower_bound(it->values.begin(), it->values.end(), low);
    if (pos != it->values.end() && *pos == low) return false;
    it->values.insert(pos, low);
    if (it->values.size() > kArrayLimit) *it = array_to_bitset(std::move(*it));
  }
  ++it->cardinality;
  ++cardinality_;
  return true;
}

bool CompressedBitmap::contains(uint32_t offset) const noexcept {
  const uint16_t key = static_cast<uint16_t>(offset >> 16);
  auto it = std::lower_bound(containers_.begin(), containers_.end(), key,
                             [](const Container& c, uint16_t k) { return c.key < k; });
  return it != containers_.end() && it->key == key &&
         it->contains(static_cast<uint16_t>(offset & 0xFFFF));
}

std::vector<CompressedBitmap::ContainerInfo> CompressedBitmap::containers() const {
  std::vector<ContainerInfo> out;
  out.reserve(containers_.size());
  for (const auto& c : containers_) out.push_back({c.key, c.kind, c.cardinality});
  return out;
}

std::vector<uint32_t> CompressedBitmap::to_vector() const {
  std::vector<uint32_t> out;
  out.reserve(cardinality_);
  for (const auto& c : containers_) {
    const uint32_t high = static_cast<uint32_t>(c.key) << 16;
    if (c.kind == Kind::array) {
      for (uint16_t v : c.values) out.push_back(high | v);
    } else {
      for (uint16_t v : words_to_values(c.words, c.cardinality)) out.push_back(high | v);
    }
  }
  return out;
}

bool operator==(const CompressedBitmap& a, const CompressedBitmap& b) {
  return a.cardinality_ == b.cardinality_ && a.containers_ == b.containers_;
}

bool CompressedBitmap::check_invariants() const {
  uint64_t total = 0;
  for (std::size_t i = 0; i < containers_.size(); ++i) {
    const Container& c = containers_[i];
    if (i > 0 && containers_[i - 1].key >= c.key) return false;
    if (c.cardinality == 0) return false;
    if (c.kind == Kind::array) {
      if (c.cardinality > kArrayLimit || c.values.size() != c.cardinality) return false;
      if (!c.words.empty()) return false;
      for (std::size_t k = 1; k < c.values.size(); ++k) {
        if (c.values[k - 1] >= c.values[k]) return false;
      }
    } else {
      if (c.cardinality <= kArrayLimit || c.words.size() != kWords) return false;
      uint32_t pop = 0;
      for (uint64_t w : c.words) pop += static_cast<uint32_t>(std::popcount(w));
      if (pop != c.cardinality) return false;
    }
    total += c.cardinality;
  }
  return total == cardinality_;
}

CompressedBitmap bitmap_and(const CompressedBitmap& a, const CompressedBitmap& b) {
  return combine(a.containers_, b.containers_, false, false, container_and,
                 [](CompressedBitmap& out, Container&& c) { out.push_container(std::move(c)); });
}

CompressedBitmap bitmap_or(const CompressedBitmap& a, const CompressedBitmap& b) {
  return combine(a.containers_, b.containers_, true, true, container_or,
                 [](CompressedBitmap& out, Container&& c) { out.push_container(std::move(c)); });
}

CompressedBitmap bitmap_xor(const CompressedBitmap& a, const CompressedBitmap& b) {
  return combine(a.containers_, b.containers_, true, true, container_xor,
                 [](CompressedBitmap& out, Container&& c) { out.push_container(std::move(c)); });
}

CompressedBitmap bitmap_and_not(const CompressedBitmap& a, const CompressedBitmap& b) {
  return combine(a.containers_, b.containers_, true, false, container_and_not,
                 [](CompressedBitmap& out, Container&& c) { out.push_container(std::move(c)); });
}

// --- iteration ---

CompressedBitmap::const_iterator::const_iterator(const std::vector<Container>* containers,
                                                 std::size_t container)
    : containers_(containers), container_(container) {
  settle();
}

// Positions on the first member at or after (container_, pos_), or on end().
void CompressedBitmap::const_iterator::settle() {
  while (container_ < containers_->size()) {
    const Container& c = (*containers_)[container_];
    const uint32_t high = static_cast<uint32_t>(c.key) << 16;
    if (c.kind == Kind::array) {
      if (pos_ < c.values.size()) {
        current_ = high | c.values[pos_];
        return;
      }
    } else {
      std::size_t w = pos_ >> 6;
      if (w < kWords) {
        uint64_t bits = c.words[w] & (~uint64_t{0} << (pos_ & 63));
        while (bits == 0 && ++w < kWords) bits = c.words[w];
        if (bits != 0) {
          pos_ = static_cast<uint32_t>(w * 64 + std::countr_zero(bits));
          current_ = high | pos_;
          return;
        }
      }
    }
    ++container_;
    pos_ = 0;
  }
  pos_ = 0;
}

CompressedBitmap::const_iterator& CompressedBitmap::const_iterator::operator++() {
  ++pos_;
  settle();
  return *this;
}

CompressedBitmap::const_iterator CompressedBitmap::begin() const {
  return const_iterator(&containers_, 0);
}

CompressedBitmap::const_iterator CompressedBitmap::end() const {
  return const_iterator(&containers_, containers_.size());
}

// --- serialization ---

std::size_t CompressedBitmap::serialized_size() const noexcept {
  std::size_t n = 4 + 4;
  for (const auto& c : containers_) {
    n += 2 + 1 + 4;
    n += c.kind == Kind::array ? 2 * c.values.size() : 8 * kWords;
  }
  return n;
}

void CompressedBitmap::serialize_to(ByteWriter& out) const {
  out.put_magic(std::string_view(kMagic, 4));
  out.put_u32(static_cast<uint32_t>(containers_.size()));
  for (const auto& c : containers_) {
    out.put_u16(c.key);
    out.put_u8(static_cast<uint8_t>(c.kind));
    out.put_u32(c.cardinality);
    if (c.kind == Kind::array) {
      for (uint16_t v : c.values) out.put_u16(v);
    } else {
      for (uint64_t w : c.words) out.put_u64(w);
    }
  }
}

std::vector<uint8_t> CompressedBitmap::serialize() const {
  ByteWriter out;
  serialize_to(out);
  return std::move(out).take();
}

CompressedBitmap CompressedBitmap::read_from(ByteReader& in, bool require_end) {
  auto corrupt = [](const char* what) {
    return Error(ErrorCode::corruption, std::string("bitmap: ") + what);
  };
  in.expect_magic(std::string_view(kMagic, 4), "bitmap");
  const uint32_t count = in.get_u32();
  if (count > 65536) throw corrupt("container count out of range");
  CompressedBitmap out;
  out.containers_.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    Container c;
    c.key = in.get_u16();
    const uint8_t kind = in.get_u8();
    c.cardinality = in.get_u32();
    if (i > 0 && out.containers_.back().key >= c.key) throw corrupt("container keys not increasing");
    if (c.cardinality == 0) throw corrupt("empty container");
    if (kind == static_cast<uint8_t>(Kind::array)) {
      if (c.cardinality > kArrayLimit) throw corrupt("array container too large");
      const auto raw = in.get_bytes(std::size_t{c.cardinality} * 2);
      c.values.resize(c.cardinality);
      if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(c.values.data(), raw.data(), raw.size());
      } else {
        for (std::size_t k = 0; k < c.values.size(); ++k) {
          c.values[k] = static_cast<uint16_t>(raw[2 * k] | (raw[2 * k + 1] << 8));
        }
      }
      bool ordered = true;
      for (std::size_t k = 1; k < c.values.size(); ++k) ordered &= c.values[k - 1] < c.values[k];
      if (!ordered) throw corrupt("array values not increasing");
    } else if (kind == static_cast<uint8_t>(Kind::bitset)) {
      if (c.cardinality <= kArrayLimit || c.cardinality > 65536) {
        throw corrupt("bitset container cardinality out of range");
      }
      c.kind = Kind::bitset;
      c.words.resize(kWords);
      uint32_t pop = 0;
      const auto raw = in.get_bytes(kWords * 8);
      for (std::size_t k = 0; k < kWords; ++k) {
        uint64_t w = 0;
        for (int b = 0; b < 8; ++b) w |= static_cast<uint64_t>(raw[8 * k + b]) << (8 * b);
        c.words[k] = w;
        pop += static_cast<uint32_t>(std::popcount(w));
      }
      if (pop != c.cardinality) throw corrupt("bitset cardinality mismatch");
    } else {
      throw corrupt("unknown container kind");
    }
    out.cardinality_ += c.cardinality;
    out.containers_.push_back(std::move(c));
  }
  if (require_end && !in.at_end()) throw corrupt("trailing bytes");
  return out;
}

CompressedBitmap CompressedBitmap::deserialize(std::span<const uint8_t> bytes) {
  ByteReader in(bytes);
  return read_from(in, true);
}

}  // namespace bitup
