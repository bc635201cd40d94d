#pragma once

// Immutable columnar tables with a fixed physical buffer layout.
//
// Each column owns a validity bitmap (bit i, LSB-first within each byte, set
// iff row i is non-null) followed by its value buffers:
//   Int64 / Float64  data: length * 8 bytes, little-endian
//   Utf8             offsets: (length + 1) * 4 bytes of u32, then data bytes
// Non-nullable columns still carry an all-ones bitmap, so a table's buffer
// count depends only on its schema.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pflow/bytes.hpp"
#include "pflow/error.hpp"

namespace pflow {

enum class DataType : std::uint8_t { Int64, Float64, Utf8 };

std::string_view dtype_name(DataType t) noexcept;
std::optional<DataType> parse_dtype(std::string_view name) noexcept;

struct Field {
  std::string name;
  DataType dtype = DataType::Int64;
  bool nullable = true;

  bool operator==(const Field&) const = default;
};

class Schema {
 public:
  // Throws InvalidSchema on an empty field list, empty names or duplicates.
  explicit Schema(std::vector<Field> fields);

  const std::vector<Field>& fields() const noexcept { return fields_; }
  std::size_t size() const noexcept { return fields_.size(); }
  const Field& field(std::size_t i) const { return fields_.at(i); }

  std::optional<std::size_t> index_of(std::string_view name) const noexcept;
  // Throws UnknownField.
  std::size_t require(std::string_view name) const;

  bool operator==(const Schema&) const = default;

 private:
  std::vector<Field> fields_;
};

// Number of bytes in a validity bitmap covering nrows rows.
constexpr std::size_t validity_bytes(std::size_t nrows) noexcept { return (nrows + 7) / 8; }

// Fixed-length bit array, LSB-first within each byte; padding bits are zero.
class Bitmap {
 public:
  Bitmap() = default;
  explicit Bitmap(std::size_t nbits, bool value = false);
  static Bitmap from_bytes(Bytes bytes, std::size_t nbits);

  std::size_t size() const noexcept { return nbits_; }
  bool get(std::size_t i) const noexcept { return (bytes_[i >> 3] >> (i & 7)) & 1u; }
  void set(std::size_t i, bool v) noexcept;
  std::size_t count() const noexcept;

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::span<std::uint8_t> mutable_bytes() noexcept { return bytes_; }

  Bitmap operator~() const;
  Bitmap operator&(const Bitmap& other) const;

  bool operator==(const Bitmap&) const = default;

 private:
  void clear_padding() noexcept;

  Bytes bytes_;
  std::size_t nbits_ = 0;
};

class Column {
 public:
  // Validates buffer sizes (LengthMismatch) and Utf8 offsets (BadOffsets).
  // Padding bits of the validity bitmap are cleared. `offsets` must be
  // empty for numeric types.
  static Column from_buffers(DataType dtype, std::size_t length, Bytes validity, Bytes offsets, Bytes data);

  static Column int64(std::span<const std::int64_t> values, const std::vector<bool>& valid = {});
  static Column float64(std::span<const double> values, const std::vector<bool>& valid = {});
  static Column utf8(std::span<const std::string> values, const std::vector<bool>& valid = {});

  DataType dtype() const noexcept { return dtype_; }
  std::size_t length() const noexcept { return length_; }

  std::span<const std::uint8_t> validity() const noexcept { return *validity_; }
  std::span<const std::uint8_t> offsets_bytes() const noexcept { return *offsets_; }
  std::span<const std::uint8_t> data() const noexcept { return *data_; }

  bool is_valid(std::size_t row) const noexcept { return ((*validity_)[row >> 3] >> (row & 7)) & 1u; }
  std::size_t null_count() const noexcept;

  std::span<const std::int64_t> int64_values() const noexcept;
  std::span<const double> float64_values() const noexcept;
  std::span<const std::uint64_t> words() const noexcept;  // numeric data as raw 64-bit words
  std::span<const std::uint32_t> utf8_offsets() const noexcept;
  std::string_view utf8_value(std::size_t row) const noexcept;

  // 2 for numeric columns, 3 for Utf8.
  std::size_t buffer_count() const noexcept { return dtype_ == DataType::Utf8 ? 3 : 2; }
  // Buffers in layout order: validity, [offsets,] data.
  std::span<const std::uint8_t> buffer(std::size_t k) const;

  // Bit-exact comparison of all buffers.
  bool operator==(const Column& other) const noexcept;

 private:
  Column(DataType dtype, std::size_t length, Bytes validity, Bytes offsets, Bytes data);

  DataType dtype_;
  std::size_t length_;
  std::shared_ptr<const Bytes> validity_;
  std::shared_ptr<const Bytes> offsets_;
  std::shared_ptr<const Bytes> data_;
};

// Incremental construction of one column.
class ColumnBuilder {
 public:
  explicit ColumnBuilder(DataType dtype, std::size_t reserve = 0);

  void append_int64(std::int64_t v);
  void append_float64(double v);
  void append_utf8(std::string_view v);
  // Appends a null slot; the value bytes are zero (or an empty string).
  void append_null();
  // Copies value and validity of row `row` of `src` (same dtype).
  void append_from(const Column& src, std::size_t row);

  std::size_t length() const noexcept { return length_; }
  Column finish();

 private:
  void push_valid(bool valid);

  DataType dtype_;
  std::size_t length_ = 0;
  Bytes validity_;
  Bytes offsets_;
  Bytes data_;
};

class Table {
 public:
  const Schema& schema() const noexcept { return *schema_; }
  std::size_t nrows() const noexcept { return nrows_; }
  std::size_t num_columns() const noexcept { return columns_.size(); }
  const Column& column(std::size_t i) const { return columns_.at(i); }
  const Column& column(std::string_view name) const { return columns_[schema_->require(name)]; }
  const std::vector<Column>& columns() const noexcept { return columns_; }

  bool operator==(const Table& other) const noexcept;

 private:
  friend Table new_table(Schema schema, std::vector<Column> columns);
  Table(std::shared_ptr<const Schema> schema, std::vector<Column> columns, std::size_t nrows);

  std::shared_ptr<const Schema> schema_;
  std::vector<Column> columns_;
  std::size_t nrows_ = 0;
};

// Validates and assembles a table. Errors: SchemaMismatch (column count),
// LengthMismatch, TypeMismatch, NullViolation (null in a non-nullable field).
Table new_table(Schema schema, std::vector<Column> columns);

// A 0-row table with the given schema.
Table empty_table(const Schema& schema);

class TableBuilder {
 public:
  explicit TableBuilder(Schema schema, std::size_t reserve = 0);

  ColumnBuilder& column(std::size_t i) { return builders_.at(i); }
  void append_row_from(const Table& src, std::size_t row);
  Table finish();

 private:
  Schema schema_;
  std::vector<ColumnBuilder> builders_;
};

enum class BufferRole : std::uint8_t { Validity, Offsets, Data };

std::string_view buffer_role_name(BufferRole role) noexcept;

struct BufferSlot {
  std::size_t column = 0;
  BufferRole role = BufferRole::Validity;
  std::size_t length = 0;

  bool operator==(const BufferSlot&) const = default;
};

// Buffers per column in schema order, validity then (offsets) then data.
std::vector<BufferSlot> buffer_layout(const Table& table);
std::size_t buffer_count(const Schema& schema) noexcept;

// Rows whose mask bit is set, in order. Throws MaskLengthMismatch.
Table select(const Table& table, const Bitmap& mask);

// Rows at the given positions, in the given order (positions may repeat).
Table take(const Table& table, std::span<const std::size_t> rows);

// Rows [offset, offset + length) clipped to the table.
Table slice(const Table& table, std::size_t offset, std::size_t length);

// Throws EmptyList or SchemaMismatch.
Table concat(std::span<const Table> tables);

// Stable ascending sort. Int64 numerically, Float64 by total order with NaN
// greatest, Utf8 bytewise. Throws UnknownField or NullKey.
Table sort_by(const Table& table, std::span<const std::string> keys);

// Permutation that sort_by applies.
std::vector<std::size_t> sort_indices(const Table& table, std::span<const std::string> keys);

}  // namespace pflow
