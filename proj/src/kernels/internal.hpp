#pragma once

#include "pflow/kernels.hpp"

namespace pflow::kernels::detail {

extern const KernelTable kScalar;

#if defined(PFLOW_HAVE_AVX2)
extern const KernelTable kAvx2;
#endif

// Shared by the SIMD variants for their tails.
std::uint32_t crc32_slice8(std::uint32_t crc, const std::uint8_t* p, std::size_t n) noexcept;

// Appends bits LSB-first into a zeroed destination bitmap.
class BitAppender {
 public:
  explicit BitAppender(std::uint8_t* dst) : dst_(dst) {}

  // Appends the low `count` bits of `bits` (count <= 64).
  void append(std::uint64_t bits, unsigned count) noexcept {
    while (count > 0) {
      const unsigned bit_in_byte = static_cast<unsigned>(pos_ & 7);
      const unsigned room = 8 - bit_in_byte;
      const unsigned take = count < room ? count : room;
      const auto chunk = static_cast<std::uint8_t>(bits & ((1u << take) - 1u));
      dst_[pos_ >> 3] |= static_cast<std::uint8_t>(chunk << bit_in_byte);
      bits >>= take;
      count -= take;
      pos_ += take;
    }
  }

  std::size_t bits_written() const noexcept { return pos_; }

 private:
  std::uint8_t* dst_;
  std::size_t pos_ = 0;
};

// Loads up to 8 bytes of a bitmap as a little-endian word; bytes past the
// end read as zero.
inline std::uint64_t load_word(std::span<const std::uint8_t> bitmap, std::size_t word) noexcept {
  std::uint64_t v = 0;
  const std::size_t start = word * 8;
  const std::size_t n = bitmap.size() - start < 8 ? bitmap.size() - start : 8;
  for (std::size_t i = 0; i < n; ++i) {
    v |= static_cast<std::uint64_t>(bitmap[start + i]) << (8 * i);
  }
  return v;
}

inline std::uint64_t low_bits(std::size_t n) noexcept {
  return n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
}

}  // namespace pflow::kernels::detail
