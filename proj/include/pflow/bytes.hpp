#pragma once

// Little-endian encoding helpers shared by the envelope and container formats.

#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>
#include <vector>

#include "pflow/error.hpp"

namespace pflow {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

class ByteWriter {
 public:
  explicit ByteWriter(Bytes& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v); }
  void u32(std::uint32_t v) { le(v); }
  void u64(std::uint64_t v) { le(v); }
  void raw(ByteSpan data) { out_.insert(out_.end(), data.begin(), data.end()); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void zeros(std::size_t n) { out_.resize(out_.size() + n, 0); }
  std::size_t size() const { return out_.size(); }

 private:
  template <typename T>
  void le(T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }

  Bytes& out_;
};

// Bounds-checked cursor; running past the end raises Truncated.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  std::uint8_t u8() { return le<std::uint8_t>(); }
  std::uint16_t u16() { return le<std::uint16_t>(); }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }

  ByteSpan take(std::uint64_t n) {
    require(n);
    auto out = data_.subspan(pos_, static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return out;
  }
  void skip(std::uint64_t n) { take(n); }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void require(std::uint64_t n) const {
    if (n > remaining()) {
      throw Error(ErrorCode::Truncated,
                  "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                      ", only " + std::to_string(remaining()) + " available");
    }
  }

  template <typename T>
  T le() {
    require(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return v;
  }

  ByteSpan data_;
  std::size_t pos_ = 0;
};

inline std::uint64_t pad8(std::uint64_t n) { return (n + 7) & ~std::uint64_t{7}; }

}  // namespace pflow
