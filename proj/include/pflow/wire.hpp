#pragma once

// Table envelope (".ptbl"), all integers little-endian:
//
//   "PTBL" | u16 version=1 | u8 codec | u32 schema_len | schema JSON
//   | u64 nrows | u32 buffer_count
//   | per buffer: u8 raw_flag | u64 uncompressed_len | u64 stored_len
//                 | payload, zero-padded to a multiple of 8 bytes
//
// Buffers follow buffer_layout() order and are compressed independently
// ("inner" compression). Buffers shorter than 64 bytes, or that do not
// shrink, are stored raw.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "pflow/bytes.hpp"
#include "pflow/codec.hpp"
#include "pflow/columnar.hpp"

namespace pflow::wire {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'T', 'B', 'L'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kRawThreshold = 64;
inline constexpr std::size_t kBufferHeaderSize = 17;

// Worker count for per-buffer tasks; 0 means one task per buffer.
struct Parallelism {
  std::size_t workers = 0;

  static constexpr Parallelism automatic() { return {0}; }
  static constexpr Parallelism fixed(std::size_t n) { return {n == 0 ? 1 : n}; }
  std::size_t resolve(std::size_t tasks) const noexcept { return workers == 0 ? tasks : workers; }
};

std::string schema_to_json(const Schema& schema);
// Throws InvalidSchema.
Schema schema_from_json(std::string_view json);

// Throws CodecFailure (with the buffer index) if a codec reports an error.
Bytes serialize(const Table& table, CodecId codec, Parallelism parallelism = Parallelism::automatic());

// Errors: BadMagic, UnsupportedVersion, Truncated, CodecFailure,
// LayoutMismatch, InvalidSchema, plus column validation errors.
Table deserialize(ByteSpan bytes, Parallelism parallelism = Parallelism::automatic());

// Parallel fan-out of serialize(): one task per buffer.
std::size_t buffer_tasks(const Table& table);

struct BufferHeader {
  bool raw = true;
  std::uint64_t uncompressed_len = 0;
  std::uint64_t stored_len = 0;
  std::size_t payload_offset = 0;
};

struct EnvelopeInfo {
  CodecId codec = CodecId::None;
  std::string schema_json;
  std::uint64_t nrows = 0;
  std::vector<BufferHeader> buffers;
  std::size_t header_size = 0;  // bytes before the first buffer header
  std::size_t total_size = 0;
};

// Parses headers only; payloads are bounds-checked but not decoded.
EnvelopeInfo inspect(ByteSpan bytes);

// Exact size of serialize(first `nrows` rows of table, CodecId::None).
std::size_t uncompressed_envelope_size(const Table& table, std::size_t nrows);

}  // namespace pflow::wire
