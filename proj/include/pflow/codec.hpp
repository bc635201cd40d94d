#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>

#include "pflow/bytes.hpp"

namespace pflow {

// One byte on the wire. Deflate is the raw DEFLATE bit format, no zlib or
// gzip wrapper.
enum class CodecId : std::uint8_t { None = 0, Lz4Frame = 1, Zstd = 2, Deflate = 3 };

// "none", "lz4f", "zstd", "deflate"
std::string_view codec_name(CodecId codec) noexcept;
std::optional<CodecId> parse_codec(std::string_view name) noexcept;
std::optional<CodecId> codec_from_byte(std::uint8_t b) noexcept;

// Fixed levels: LZ4 frame default, Zstd 1, Deflate 1.
namespace codec_level {
inline constexpr int kZstd = 1;
inline constexpr int kDeflate = 1;
}  // namespace codec_level

// Compresses `input` as one self-contained stream. Throws CodecFailure.
// CodecId::None returns a verbatim copy.
Bytes compress(CodecId codec, ByteSpan input);

// Decompresses into `out`, whose size must equal the original length.
// Throws CodecFailure on malformed input or a size mismatch.
void decompress(CodecId codec, ByteSpan input, std::span<std::uint8_t> out);

}  // namespace pflow
