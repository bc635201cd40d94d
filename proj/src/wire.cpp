#include "pflow/wire.hpp"

#include <cstring>
#include <optional>

#include "json.hpp"
#include "pflow/parallel.hpp"

namespace pflow::wire {

namespace {

struct Stored {
  bool raw = true;
  Bytes compressed;  // empty when raw
};

std::size_t fixed_header_size(std::size_t schema_len) {
  return kMagic.size() + 2 + 1 + 4 + schema_len + 8 + 4;
}

void read_header(ByteReader& r, EnvelopeInfo& info) {
  if (r.remaining() < kMagic.size()) throw Error(ErrorCode::Truncated, "envelope shorter than its magic");
  const auto magic = r.take(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) {
    throw Error(ErrorCode::BadMagic, "envelope does not start with PTBL");
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) throw Error(ErrorCode::UnsupportedVersion, "envelope version " + std::to_string(version));
  const std::uint8_t codec_byte = r.u8();
  const auto codec = codec_from_byte(codec_byte);
  if (!codec) throw Error(ErrorCode::CodecFailure, "unknown codec id " + std::to_string(codec_byte));
  info.codec = *codec;
  const std::uint32_t schema_len = r.u32();
  const auto schema_bytes = r.take(schema_len);
  info.schema_json.assign(schema_bytes.begin(), schema_bytes.end());
  info.nrows = r.u64();
}

// Expected uncompressed length of each layout slot; nullopt where it
// depends on decoded offsets.
std::vector<std::optional<std::uint64_t>> expected_lengths(const Schema& schema, std::uint64_t nrows) {
  std::vector<std::optional<std::uint64_t>> out;
  for (const Field& f : schema.fields()) {
    out.emplace_back((nrows + 7) / 8);
    if (f.dtype == DataType::Utf8) {
      out.emplace_back((nrows + 1) * 4);
      out.emplace_back(std::nullopt);
    } else {
      out.emplace_back(nrows * 8);
    }
  }
  return out;
}

}  // namespace

std::string schema_to_json(const Schema& schema) {
  nlohmann::json fields = nlohmann::json::array();
  for (const Field& f : schema.fields()) {
    fields.push_back({{"name", f.name}, {"dtype", std::string(dtype_name(f.dtype))}, {"nullable", f.nullable}});
  }
  return nlohmann::json{{"fields", fields}}.dump();
}

Schema schema_from_json(std::string_view json) {
  try {
    const auto doc = nlohmann::json::parse(json);
    std::vector<Field> fields;
    for (const auto& f : doc.at("fields")) {
      const auto dtype = parse_dtype(f.at("dtype").get<std::string>());
      if (!dtype) throw Error(ErrorCode::InvalidSchema, "unknown dtype " + f.at("dtype").dump());
      fields.push_back({f.at("name").get<std::string>(), *dtype, f.at("nullable").get<bool>()});
    }
    return Schema(std::move(fields));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, std::string("schema JSON: ") + e.what());
  }
}

std::size_t buffer_tasks(const Table& table) { return buffer_count(table.schema()); }

Bytes serialize(const Table& table, CodecId codec, Parallelism parallelism) {
  const auto layout = buffer_layout(table);
  std::vector<ByteSpan> sources;
  sources.reserve(layout.size());
  for (const BufferSlot& slot : layout) {
    const Column& col = table.column(slot.column);
    const std::size_t k = slot.role == BufferRole::Validity ? 0 : (slot.role == BufferRole::Offsets ? 1 : col.buffer_count() - 1);
    sources.push_back(col.buffer(k));
  }

  std::vector<Stored> stored(layout.size());
  if (codec != CodecId::None) {
    parallel_for(layout.size(), parallelism.resolve(layout.size()), [&](std::size_t i) {
      if (sources[i].size() < kRawThreshold) return;
      try {
        Bytes c = compress(codec, sources[i]);
        if (c.size() < sources[i].size()) stored[i] = {false, std::move(c)};
      } catch (const Error& e) {
        throw Error(ErrorCode::CodecFailure, "buffer " + std::to_string(i) + ": " + e.what(), i);
      }
    });
  }

  const std::string schema_json = schema_to_json(table.schema());
  std::size_t total = fixed_header_size(schema_json.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    total += kBufferHeaderSize + pad8(stored[i].raw ? sources[i].size() : stored[i].compressed.size());
  }

  Bytes out;
  out.reserve(total);
  ByteWriter w(out);
  w.raw(ByteSpan(kMagic));
  w.u16(kVersion);
  w.u8(static_cast<std::uint8_t>(codec));
  w.u32(static_cast<std::uint32_t>(schema_json.size()));
  w.raw(schema_json);
  w.u64(table.nrows());
  w.u32(static_cast<std::uint32_t>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const ByteSpan payload = stored[i].raw ? sources[i] : ByteSpan(stored[i].compressed);
    w.u8(stored[i].raw ? 1 : 0);
    w.u64(sources[i].size());
    w.u64(payload.size());
    w.raw(payload);
    w.zeros(pad8(payload.size()) - payload.size());
  }
  return out;
}

EnvelopeInfo inspect(ByteSpan bytes) {
  ByteReader r(bytes);
  EnvelopeInfo info;
  read_header(r, info);
  const std::uint32_t count = r.u32();
  info.header_size = r.position();
  // Each buffer needs at least its header; reject absurd counts before reserving.
  if (static_cast<std::uint64_t>(count) * kBufferHeaderSize > r.remaining()) {
    throw Error(ErrorCode::Truncated, "envelope declares " + std::to_string(count) + " buffers");
  }
  info.buffers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    BufferHeader h;
    const std::uint8_t flag = r.u8();
    if (flag > 1) throw Error(ErrorCode::LayoutMismatch, "bad raw flag " + std::to_string(flag), i);
    h.raw = flag == 1;
    h.uncompressed_len = r.u64();
    h.stored_len = r.u64();
    h.payload_offset = r.position();
    if (h.raw && h.stored_len != h.uncompressed_len) {
      throw Error(ErrorCode::LayoutMismatch, "raw buffer with stored_len != uncompressed_len", i);
    }
    if (!h.raw && info.codec == CodecId::None) {
      throw Error(ErrorCode::LayoutMismatch, "compressed buffer in an uncompressed envelope", i);
    }
    if (h.stored_len > r.remaining()) {
      throw Error(ErrorCode::Truncated, "buffer " + std::to_string(i) + " payload exceeds envelope", i);
    }
    r.skip(pad8(h.stored_len));
    info.buffers.push_back(h);
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::LayoutMismatch, std::to_string(r.remaining()) + " trailing bytes after last buffer");
  }
  info.total_size = r.position();
  return info;
}

Table deserialize(ByteSpan bytes, Parallelism parallelism) {
  const EnvelopeInfo info = inspect(bytes);
  const Schema schema = schema_from_json(info.schema_json);
  if (info.buffers.size() != buffer_count(schema)) {
    throw Error(ErrorCode::LayoutMismatch, "schema needs " + std::to_string(buffer_count(schema)) + " buffers, envelope has " +
                                               std::to_string(info.buffers.size()));
  }
  const auto expected = expected_lengths(schema, info.nrows);
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (expected[i] && *expected[i] != info.buffers[i].uncompressed_len) {
      throw Error(ErrorCode::LayoutMismatch, "buffer " + std::to_string(i) + " has length " +
                                                 std::to_string(info.buffers[i].uncompressed_len) + ", expected " +
                                                 std::to_string(*expected[i]),
                  i);
    }
  }

  std::vector<Bytes> decoded(info.buffers.size());
  parallel_for(info.buffers.size(), parallelism.resolve(info.buffers.size()), [&](std::size_t i) {
    const BufferHeader& h = info.buffers[i];
    const ByteSpan payload = bytes.subspan(h.payload_offset, h.stored_len);
    decoded[i].resize(h.uncompressed_len);
    try {
      decompress(h.raw ? CodecId::None : info.codec, payload, decoded[i]);
    } catch (const Error& e) {
      throw Error(ErrorCode::CodecFailure, "buffer " + std::to_string(i) + ": " + e.what(), i);
    }
  });

  std::vector<Column> cols;
  cols.reserve(schema.size());
  std::size_t b = 0;
  for (const Field& f : schema.fields()) {
    Bytes validity = std::move(decoded[b++]);
    Bytes offsets;
    if (f.dtype == DataType::Utf8) offsets = std::move(decoded[b++]);
    Bytes data = std::move(decoded[b++]);
    cols.push_back(Column::from_buffers(f.dtype, info.nrows, std::move(validity), std::move(offsets), std::move(data)));
  }
  return new_table(schema, std::move(cols));
}

std::size_t uncompressed_envelope_size(const Table& table, std::size_t nrows) {
  nrows = std::min(nrows, table.nrows());
  std::size_t total = fixed_header_size(schema_to_json(table.schema()).size());
  for (const Column& c : table.columns()) {
    total += kBufferHeaderSize + pad8(validity_bytes(nrows));
    if (c.dtype() == DataType::Utf8) {
      total += kBufferHeaderSize + pad8((nrows + 1) * 4);
      total += kBufferHeaderSize + pad8(c.utf8_offsets()[nrows]);
    } else {
      total += kBufferHeaderSize + pad8(nrows * 8);
    }
  }
  return total;
}

}  // namespace pflow::wire
