#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitup/error.hpp"

namespace bitup {

/// Little-endian append-only encoder.
class ByteWriter {
 public:
  void put_u8(uint8_t v) { buf_.push_back(v); }
  void put_u16(uint16_t v) { put_le(v, 2); }
  void put_u32(uint32_t v) { put_le(v, 4); }
  void put_u64(uint64_t v) { put_le(v, 8); }

  void put_bytes(std::span<const uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }
  void put_magic(std::string_view magic) {
    buf_.insert(buf_.end(), magic.begin(), magic.end());
  }
  // u32 length prefix, then raw bytes.
  void put_string(std::string_view s) {
    put_u32(static_cast<uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  void patch_u64(std::size_t pos, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_[pos + i] = static_cast<uint8_t>(v >> (8 * i));
  }

  std::size_t size() const noexcept { return buf_.size(); }
  const std::vector<uint8_t>& bytes() const noexcept { return buf_; }
  std::vector<uint8_t> take() && { return std::move(buf_); }

 private:
  void put_le(uint64_t v, int width) {
    for (int i = 0; i < width; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }

  std::vector<uint8_t> buf_;
};

/// Bounds-checked little-endian decoder. Running off the end is a corruption
/// error, never undefined behaviour.
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

  uint8_t get_u8() { return static_cast<uint8_t>(get_le(1)); }
  uint16_t get_u16() { return static_cast<uint16_t>(get_le(2)); }
  uint32_t get_u32() { return static_cast<uint32_t>(get_le(4)); }
  uint64_t get_u64() { return get_le(8); }

  std::span<const uint8_t> get_bytes(std::size_t n) {
    require(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::string get_string() {
    uint32_t n = get_u32();
    auto raw = get_bytes(n);
    return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
  }
  void expect_magic(std::string_view magic, std::string_view what) {
    auto raw = get_bytes(magic.size());
    if (std::memcmp(raw.data(), magic.data(), magic.size()) != 0) {
      throw Error(ErrorCode::corruption, std::string(what) + ": bad magic");
    }
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  void require(std::size_t n) const {
    if (n > remaining()) throw Error(ErrorCode::corruption, "truncated input");
  }
  uint64_t get_le(int width) {
    require(static_cast<std::size_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::span<const uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace bitup
