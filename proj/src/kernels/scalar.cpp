#include <array>
#include <bit>

#include "internal.hpp"

namespace pflow::kernels {

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace detail {
namespace {

constexpr std::uint32_t kCrcPoly = 0xEDB88320u;

using CrcTables = std::array<std::array<std::uint32_t, 256>, 8>;

constexpr CrcTables make_crc_tables() {
  CrcTables t{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) {
      c = (c & 1u) ? (c >> 1) ^ kCrcPoly : c >> 1;
    }
    t[0][i] = c;
  }
  for (std::size_t s = 1; s < 8; ++s) {
    for (std::size_t i = 0; i < 256; ++i) {
      t[s][i] = (t[s - 1][i] >> 8) ^ t[0][t[s - 1][i] & 0xFFu];
    }
  }
  return t;
}

constexpr CrcTables kCrcTables = make_crc_tables();

std::uint32_t crc32_scalar(std::uint32_t crc, std::span<const std::uint8_t> data) {
  return ~crc32_slice8(~crc, data.data(), data.size());
}

void partition_indices_scalar(std::span<const std::int64_t> ids, unsigned shift, unsigned bits,
                              bool hash, std::span<std::uint8_t> out) {
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::uint64_t v = static_cast<std::uint64_t>(ids[i]);
    if (hash) v = splitmix64_mix(v);
    out[i] = static_cast<std::uint8_t>((v >> shift) & mask);
  }
}

void match_mask_scalar(std::span<const std::uint8_t> indices, std::uint8_t value,
                       std::span<std::uint8_t> bitmap) {
  const std::size_t n = indices.size();
  for (std::size_t b = 0; b < (n + 7) / 8; ++b) bitmap[b] = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (indices[i] == value) bitmap[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
}

std::size_t popcount_scalar(std::span<const std::uint8_t> bitmap, std::size_t nbits) {
  std::size_t total = 0;
  const std::size_t words = (nbits + 63) / 64;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t v = load_word(bitmap, w);
    if (w == words - 1) v &= low_bits(nbits - w * 64);
    total += static_cast<std::size_t>(std::popcount(v));
  }
  return total;
}

std::size_t compress64_scalar(std::span<const std::uint64_t> src, std::span<const std::uint8_t> mask,
                              std::uint64_t* dst) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if ((mask[i >> 3] >> (i & 7)) & 1u) dst[out++] = src[i];
  }
  return out;
}

std::size_t compress_bits_scalar(std::span<const std::uint8_t> src, std::span<const std::uint8_t> mask,
                                 std::size_t nbits, std::uint8_t* dst) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < nbits; ++i) {
    if ((mask[i >> 3] >> (i & 7)) & 1u) {
      if ((src[i >> 3] >> (i & 7)) & 1u) dst[out >> 3] |= static_cast<std::uint8_t>(1u << (out & 7));
      ++out;
    }
  }
  return out;
}

}  // namespace

std::uint32_t crc32_slice8(std::uint32_t crc, const std::uint8_t* p, std::size_t n) noexcept {
  while (n >= 8) {
    const std::uint32_t lo = crc ^ (static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                                    static_cast<std::uint32_t>(p[2]) << 16 |
                                    static_cast<std::uint32_t>(p[3]) << 24);
    crc = kCrcTables[7][lo & 0xFF] ^ kCrcTables[6][(lo >> 8) & 0xFF] ^ kCrcTables[5][(lo >> 16) & 0xFF] ^
          kCrcTables[4][lo >> 24] ^ kCrcTables[3][p[4]] ^ kCrcTables[2][p[5]] ^ kCrcTables[1][p[6]] ^
          kCrcTables[0][p[7]];
    p += 8;
    n -= 8;
  }
  while (n-- > 0) {
    crc = (crc >> 8) ^ kCrcTables[0][(crc ^ *p++) & 0xFF];
  }
  return crc;
}

const KernelTable kScalar{
    Isa::Scalar,      &crc32_scalar,     &partition_indices_scalar, &match_mask_scalar,
    &popcount_scalar, &compress64_scalar, &compress_bits_scalar,
};

}  // namespace detail
}  // namespace pflow::kernels
