// Compiled with -mavx2 -mbmi2 -mpclmul -mpopcnt; only reached after a CPUID check.

#include <immintrin.h>

#include <array>
#include <bit>
#include <cstring>

#include "internal.hpp"

namespace pflow::kernels::detail {
namespace {

// Folding constants for the reflected CRC-32/IEEE polynomial: x^(4*128+32),
// x^(4*128-32), x^(128+32), x^(128-32), x^64 mod P, then P and floor(x^64/P).
alignas(16) constexpr std::uint64_t kFold4[2] = {0x0154442bd4ULL, 0x01c6e41596ULL};
alignas(16) constexpr std::uint64_t kFold1[2] = {0x01751997d0ULL, 0x00ccaa009eULL};
alignas(16) constexpr std::uint64_t kFold64[2] = {0x0163cd6124ULL, 0x0000000000ULL};
alignas(16) constexpr std::uint64_t kBarrett[2] = {0x01db710641ULL, 0x01f7011641ULL};

inline __m128i fold(__m128i acc, __m128i k, __m128i next) {
  const __m128i lo = _mm_clmulepi64_si128(acc, k, 0x00);
  const __m128i hi = _mm_clmulepi64_si128(acc, k, 0x11);
  return _mm_xor_si128(_mm_xor_si128(hi, lo), next);
}

// len >= 64 and a multiple of 16; crc is the pre-inverted register value.
std::uint32_t crc32_clmul_blocks(std::uint32_t crc, const std::uint8_t* p, std::size_t len) {
  auto load = [](const std::uint8_t* q) { return _mm_loadu_si128(reinterpret_cast<const __m128i*>(q)); };

  __m128i x1 = _mm_xor_si128(load(p), _mm_cvtsi32_si128(static_cast<int>(crc)));
  __m128i x2 = load(p + 16);
  __m128i x3 = load(p + 32);
  __m128i x4 = load(p + 48);
  p += 64;
  len -= 64;

  __m128i k = _mm_load_si128(reinterpret_cast<const __m128i*>(kFold4));
  while (len >= 64) {
    x1 = fold(x1, k, load(p));
    x2 = fold(x2, k, load(p + 16));
    x3 = fold(x3, k, load(p + 32));
    x4 = fold(x4, k, load(p + 48));
    p += 64;
    len -= 64;
  }

  k = _mm_load_si128(reinterpret_cast<const __m128i*>(kFold1));
  x1 = fold(x1, k, x2);
  x1 = fold(x1, k, x3);
  x1 = fold(x1, k, x4);
  while (len >= 16) {
    x1 = fold(x1, k, load(p));
    p += 16;
    len -= 16;
  }

  // 128 -> 64 bits.
  const __m128i mask32 = _mm_setr_epi32(~0, 0, ~0, 0);
  __m128i x2b = _mm_clmulepi64_si128(x1, k, 0x10);
  x1 = _mm_xor_si128(_mm_srli_si128(x1, 8), x2b);

  k = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(kFold64));
  x2b = _mm_srli_si128(x1, 4);
  x1 = _mm_and_si128(x1, mask32);
  x1 = _mm_xor_si128(_mm_clmulepi64_si128(x1, k, 0x00), x2b);

  // Barrett reduction to 32 bits.
  k = _mm_load_si128(reinterpret_cast<const __m128i*>(kBarrett));
  x2b = _mm_and_si128(x1, mask32);
  x2b = _mm_clmulepi64_si128(x2b, k, 0x10);
  x2b = _mm_and_si128(x2b, mask32);
  x2b = _mm_clmulepi64_si128(x2b, k, 0x00);
  x1 = _mm_xor_si128(x1, x2b);
  return static_cast<std::uint32_t>(_mm_extract_epi32(x1, 1));
}

std::uint32_t crc32_avx2(std::uint32_t crc, std::span<const std::uint8_t> data) {
  std::uint32_t reg = ~crc;
  const std::uint8_t* p = data.data();
  std::size_t n = data.size();
  if (n >= 64) {
    const std::size_t blocks = n & ~std::size_t{15};
    reg = crc32_clmul_blocks(reg, p, blocks);
    p += blocks;
    n -= blocks;
  }
  return ~crc32_slice8(reg, p, n);
}

// Low 64 bits of a*b per lane; AVX2 has no 64-bit mullo.
inline __m256i mullo64(__m256i a, __m256i b) {
  const __m256i lo = _mm256_mul_epu32(a, b);
  const __m256i cross1 = _mm256_mul_epu32(_mm256_srli_epi64(a, 32), b);
  const __m256i cross2 = _mm256_mul_epu32(a, _mm256_srli_epi64(b, 32));
  return _mm256_add_epi64(lo, _mm256_slli_epi64(_mm256_add_epi64(cross1, cross2), 32));
}

inline __m256i mix4(__m256i x) {
  const __m256i c1 = _mm256_set1_epi64x(static_cast<long long>(0xbf58476d1ce4e5b9ULL));
  const __m256i c2 = _mm256_set1_epi64x(static_cast<long long>(0x94d049bb133111ebULL));
  x = mullo64(_mm256_xor_si256(x, _mm256_srli_epi64(x, 30)), c1);
  x = mullo64(_mm256_xor_si256(x, _mm256_srli_epi64(x, 27)), c2);
  return _mm256_xor_si256(x, _mm256_srli_epi64(x, 31));
}

void partition_indices_avx2(std::span<const std::int64_t> ids, unsigned shift, unsigned bits, bool hash,
                            std::span<std::uint8_t> out) {
  const std::uint64_t mask = (std::uint64_t{1} << bits) - 1;
  const __m256i vmask = _mm256_set1_epi64x(static_cast<long long>(mask));
  const __m128i vshift = _mm_cvtsi32_si128(static_cast<int>(shift));
  const __m256i low_dwords = _mm256_setr_epi32(0, 2, 4, 6, 0, 2, 4, 6);

  const std::size_t n = ids.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(ids.data() + i));
    if (hash) v = mix4(v);
    v = _mm256_and_si256(_mm256_srl_epi64(v, vshift), vmask);
    const __m128i d = _mm256_castsi256_si128(_mm256_permutevar8x32_epi32(v, low_dwords));
    const __m128i w = _mm_packus_epi32(d, d);
    const __m128i b = _mm_packus_epi16(w, w);
    const auto packed = static_cast<std::uint32_t>(_mm_cvtsi128_si32(b));
    std::memcpy(out.data() + i, &packed, 4);
  }
  for (; i < n; ++i) {
    std::uint64_t v = static_cast<std::uint64_t>(ids[i]);
    if (hash) v = splitmix64_mix(v);
    out[i] = static_cast<std::uint8_t>((v >> shift) & mask);
  }
}

void match_mask_avx2(std::span<const std::uint8_t> indices, std::uint8_t value, std::span<std::uint8_t> bitmap) {
  const std::size_t n = indices.size();
  const __m256i needle = _mm256_set1_epi8(static_cast<char>(value));
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(indices.data() + i));
    const auto bits = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(v, needle)));
    std::memcpy(bitmap.data() + i / 8, &bits, 4);
  }
  const std::size_t nbytes = (n + 7) / 8;
  for (std::size_t b = i / 8; b < nbytes; ++b) bitmap[b] = 0;
  for (; i < n; ++i) {
    if (indices[i] == value) bitmap[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
}

// Nibble-lookup popcount with byte sums folded by SAD.
std::size_t popcount_avx2(std::span<const std::uint8_t> bitmap, std::size_t nbits) {
  const __m256i lookup = _mm256_setr_epi8(0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4, 0, 1, 1, 2, 1, 2, 2, 3,
                                          1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_nibble = _mm256_set1_epi8(0x0f);
  const std::size_t full_bytes = nbits / 8;

  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 32 <= full_bytes; i += 32) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(bitmap.data() + i));
    const __m256i lo = _mm256_shuffle_epi8(lookup, _mm256_and_si256(v, low_nibble));
    const __m256i hi = _mm256_shuffle_epi8(lookup, _mm256_and_si256(_mm256_srli_epi16(v, 4), low_nibble));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(_mm256_add_epi8(lo, hi), _mm256_setzero_si256()));
  }
  std::size_t total = static_cast<std::size_t>(_mm256_extract_epi64(acc, 0) + _mm256_extract_epi64(acc, 1) +
                                               _mm256_extract_epi64(acc, 2) + _mm256_extract_epi64(acc, 3));
  for (; i < full_bytes; ++i) total += static_cast<std::size_t>(std::popcount(bitmap[i]));
  if (const std::size_t rest = nbits % 8; rest != 0) {
    total += static_cast<std::size_t>(std::popcount(static_cast<unsigned>(bitmap[full_bytes] & ((1u << rest) - 1u))));
  }
  return total;
}

// For each 4-bit lane mask, the dword permutation that left-packs the
// selected 64-bit lanes.
constexpr std::array<std::array<std::int32_t, 8>, 16> make_pack_table() {
  std::array<std::array<std::int32_t, 8>, 16> t{};
  for (int m = 0; m < 16; ++m) {
    int out = 0;
    for (int lane = 0; lane < 4; ++lane) {
      if ((m >> lane) & 1) {
        t[m][2 * out] = 2 * lane;
        t[m][2 * out + 1] = 2 * lane + 1;
        ++out;
      }
    }
    for (; out < 4; ++out) {
      t[m][2 * out] = 0;
      t[m][2 * out + 1] = 1;
    }
  }
  return t;
}

alignas(32) constexpr auto kPackTable = make_pack_table();

std::size_t compress64_avx2(std::span<const std::uint64_t> src, std::span<const std::uint8_t> mask,
                            std::uint64_t* dst) {
  const std::size_t n = src.size();
  std::size_t out = 0;
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const unsigned m8 = mask[i >> 3];
    for (unsigned half = 0; half < 2; ++half) {
      const unsigned m = (m8 >> (4 * half)) & 0xFu;
      if (m == 0) continue;
      const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src.data() + i + 4 * half));
      const __m256i perm = _mm256_load_si256(reinterpret_cast<const __m256i*>(kPackTable[m].data()));
      const __m256i packed = _mm256_permutevar8x32_epi32(v, perm);
      const int cnt = std::popcount(m);
      const __m256i lanes = _mm256_setr_epi64x(0, 1, 2, 3);
      const __m256i store_mask = _mm256_cmpgt_epi64(_mm256_set1_epi64x(cnt), lanes);
      _mm256_maskstore_epi64(reinterpret_cast<long long*>(dst + out), store_mask, packed);
      out += static_cast<std::size_t>(cnt);
    }
  }
  for (; i < n; ++i) {
    if ((mask[i >> 3] >> (i & 7)) & 1u) dst[out++] = src[i];
  }
  return out;
}

std::size_t compress_bits_avx2(std::span<const std::uint8_t> src, std::span<const std::uint8_t> mask,
                               std::size_t nbits, std::uint8_t* dst) {
  BitAppender appender(dst);
  const std::size_t words = (nbits + 63) / 64;
  for (std::size_t w = 0; w < words; ++w) {
    std::uint64_t m = load_word(mask, w);
    if (w == words - 1) m &= low_bits(nbits - w * 64);
    if (m == 0) continue;
    const std::uint64_t s = load_word(src, w);
    appender.append(_pext_u64(s, m), static_cast<unsigned>(std::popcount(m)));
  }
  return appender.bits_written();
}

}  // namespace

const KernelTable kAvx2{
    Isa::Avx2,      &crc32_avx2,     &partition_indices_avx2, &match_mask_avx2,
    &popcount_avx2, &compress64_avx2, &compress_bits_avx2,
};

}  // namespace pflow::kernels::detail
