#pragma once

// Data-parallel inner loops. Every kernel has a portable scalar reference
// and, on x86-64, an AVX2 variant (which also relies on BMI2 and PCLMULQDQ).
// The variant is picked once at startup from CPUID; PFLOW_ISA=scalar in the
// environment forces the reference path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace pflow::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

struct KernelTable {
  Isa isa;

  // Running CRC-32/IEEE (reflected, poly 0xEDB88320). Start from 0; feeding
  // data in pieces gives the same value as one call over the concatenation.
  std::uint32_t (*crc32_update)(std::uint32_t crc, std::span<const std::uint8_t> data);

  // out[i] = (mix(ids[i]) >> shift) & (2^bits - 1), mix = identity or the
  // splitmix64 finalizer. Requires out.size() >= ids.size(), bits in [1, 8].
  void (*partition_indices)(std::span<const std::int64_t> ids, unsigned shift, unsigned bits,
                            bool hash, std::span<std::uint8_t> out);

  // Bit i of `bitmap` = (indices[i] == value); the bitmap holds
  // ceil(n/8) bytes with padding bits cleared.
  void (*match_mask)(std::span<const std::uint8_t> indices, std::uint8_t value,
                     std::span<std::uint8_t> bitmap);

  // Number of set bits among the first nbits of bitmap.
  std::size_t (*popcount)(std::span<const std::uint8_t> bitmap, std::size_t nbits);

  // Left-packs the 64-bit values whose mask bit is set into dst (which must
  // hold at least popcount(mask) values). Returns the number written.
  std::size_t (*compress64)(std::span<const std::uint64_t> src, std::span<const std::uint8_t> mask,
                            std::uint64_t* dst);

  // Bit-level analogue of compress64 over the first nbits bits of src.
  // dst must be zeroed and hold ceil(popcount(mask)/8) bytes.
  std::size_t (*compress_bits)(std::span<const std::uint8_t> src, std::span<const std::uint8_t> mask,
                               std::size_t nbits, std::uint8_t* dst);
};

const KernelTable& scalar() noexcept;

// nullptr when the AVX2 variant is not compiled in or the CPU lacks it.
const KernelTable* avx2() noexcept;

// Every variant usable on this machine, scalar first.
std::vector<const KernelTable*> available();

// Selected once: the best available variant unless PFLOW_ISA=scalar.
const KernelTable& active() noexcept;

inline std::uint32_t crc32(std::span<const std::uint8_t> data, std::uint32_t crc = 0) {
  return active().crc32_update(crc, data);
}

std::uint64_t splitmix64_mix(std::uint64_t x) noexcept;

}  // namespace pflow::kernels
