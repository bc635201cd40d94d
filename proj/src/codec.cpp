#include "pflow/codec.hpp"

#include <libdeflate.h>
#include <lz4frame.h>
#include <zstd.h>

#include <cstring>
#include <memory>

#include "pflow/error.hpp"

namespace pflow {

namespace {

[[noreturn]] void fail(std::string_view codec, const std::string& what) {
  throw Error(ErrorCode::CodecFailure, std::string(codec) + ": " + what);
}

// Contexts are reused per thread; none of them carries state between calls.
struct ZstdContexts {
  std::unique_ptr<ZSTD_CCtx, decltype(&ZSTD_freeCCtx)> cctx{ZSTD_createCCtx(), &ZSTD_freeCCtx};
  std::unique_ptr<ZSTD_DCtx, decltype(&ZSTD_freeDCtx)> dctx{ZSTD_createDCtx(), &ZSTD_freeDCtx};
};

struct DeflateContexts {
  std::unique_ptr<libdeflate_compressor, decltype(&libdeflate_free_compressor)> comp{
      libdeflate_alloc_compressor(codec_level::kDeflate), &libdeflate_free_compressor};
  std::unique_ptr<libdeflate_decompressor, decltype(&libdeflate_free_decompressor)> decomp{
      libdeflate_alloc_decompressor(), &libdeflate_free_decompressor};
};

ZstdContexts& zstd_contexts() {
  thread_local ZstdContexts ctx;
  return ctx;
}

DeflateContexts& deflate_contexts() {
  thread_local DeflateContexts ctx;
  return ctx;
}

Bytes lz4_compress(ByteSpan input) {
  LZ4F_preferences_t prefs;
  std::memset(&prefs, 0, sizeof(prefs));
  Bytes out(LZ4F_compressFrameBound(input.size(), &prefs));
  const std::size_t n = LZ4F_compressFrame(out.data(), out.size(), input.data(), input.size(), &prefs);
  if (LZ4F_isError(n)) fail("lz4f", LZ4F_getErrorName(n));
  out.resize(n);
  return out;
}

void lz4_decompress(ByteSpan input, std::span<std::uint8_t> out) {
  LZ4F_dctx* raw = nullptr;
  if (LZ4F_isError(LZ4F_createDecompressionContext(&raw, LZ4F_VERSION))) fail("lz4f", "context allocation failed");
  std::unique_ptr<LZ4F_dctx, decltype(&LZ4F_freeDecompressionContext)> dctx(raw, &LZ4F_freeDecompressionContext);

  std::size_t in_pos = 0;
  std::size_t out_pos = 0;
  std::size_t hint = 1;
  while (hint != 0) {
    std::size_t src_size = input.size() - in_pos;
    std::size_t dst_size = out.size() - out_pos;
    if (src_size == 0) fail("lz4f", "frame ends early");
    hint = LZ4F_decompress(dctx.get(), out.data() + out_pos, &dst_size, input.data() + in_pos, &src_size, nullptr);
    if (LZ4F_isError(hint)) fail("lz4f", LZ4F_getErrorName(hint));
    in_pos += src_size;
    out_pos += dst_size;
    if (hint != 0 && src_size == 0 && dst_size == 0) fail("lz4f", "output larger than expected");
  }
  if (out_pos != out.size() || in_pos != input.size()) fail("lz4f", "decoded size mismatch");
}

Bytes zstd_compress(ByteSpan input) {
  Bytes out(ZSTD_compressBound(input.size()));
  const std::size_t n =
      ZSTD_compressCCtx(zstd_contexts().cctx.get(), out.data(), out.size(), input.data(), input.size(), codec_level::kZstd);
  if (ZSTD_isError(n)) fail("zstd", ZSTD_getErrorName(n));
  out.resize(n);
  return out;
}

void zstd_decompress(ByteSpan input, std::span<std::uint8_t> out) {
  const std::size_t n = ZSTD_decompressDCtx(zstd_contexts().dctx.get(), out.data(), out.size(), input.data(), input.size());
  if (ZSTD_isError(n)) fail("zstd", ZSTD_getErrorName(n));
  if (n != out.size()) fail("zstd", "decoded size mismatch");
}

Bytes deflate_compress(ByteSpan input) {
  auto* c = deflate_contexts().comp.get();
  Bytes out(libdeflate_deflate_compress_bound(c, input.size()));
  const std::size_t n = libdeflate_deflate_compress(c, input.data(), input.size(), out.data(), out.size());
  if (n == 0) fail("deflate", "compression failed");
  out.resize(n);
  return out;
}

void deflate_decompress(ByteSpan input, std::span<std::uint8_t> out) {
  std::size_t in_used = 0;
  std::size_t produced = 0;
  const auto r = libdeflate_deflate_decompress_ex(deflate_contexts().decomp.get(), input.data(), input.size(),
                                                  out.data(), out.size(), &in_used, &produced);
  if (r != LIBDEFLATE_SUCCESS) fail("deflate", "malformed stream (code " + std::to_string(static_cast<int>(r)) + ")");
  if (produced != out.size() || in_used != input.size()) fail("deflate", "decoded size mismatch");
}

}  // namespace

std::string_view codec_name(CodecId codec) noexcept {
  switch (codec) {
    case CodecId::None: return "none";
    case CodecId::Lz4Frame: return "lz4f";
    case CodecId::Zstd: return "zstd";
    case CodecId::Deflate: return "deflate";
  }
  return "unknown";
}

std::optional<CodecId> parse_codec(std::string_view name) noexcept {
  if (name == "none") return CodecId::None;
  if (name == "lz4f" || name == "lz4") return CodecId::Lz4Frame;
  if (name == "zstd") return CodecId::Zstd;
  if (name == "deflate") return CodecId::Deflate;
  return std::nullopt;
}

std::optional<CodecId> codec_from_byte(std::uint8_t b) noexcept {
  if (b > 3) return std::nullopt;
  return static_cast<CodecId>(b);
}

Bytes compress(CodecId codec, ByteSpan input) {
  switch (codec) {
    case CodecId::None: return Bytes(input.begin(), input.end());
    case CodecId::Lz4Frame: return lz4_compress(input);
    case CodecId::Zstd: return zstd_compress(input);
    case CodecId::Deflate: return deflate_compress(input);
  }
  fail("codec", "unknown codec id " + std::to_string(static_cast<int>(codec)));
}

void decompress(CodecId codec, ByteSpan input, std::span<std::uint8_t> out) {
  switch (codec) {
    case CodecId::None:
      if (input.size() != out.size()) fail("none", "size mismatch");
      if (!input.empty()) std::memcpy(out.data(), input.data(), input.size());
      return;
    case CodecId::Lz4Frame: return lz4_decompress(input, out);
    case CodecId::Zstd: return zstd_decompress(input, out);
    case CodecId::Deflate: return deflate_decompress(input, out);
  }
  fail("codec", "unknown codec id " + std::to_string(static_cast<int>(codec)));
}

}  // namespace pflow
