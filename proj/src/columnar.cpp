#include "pflow/columnar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <unordered_set>

#include "kernels/internal.hpp"
#include "pflow/kernels.hpp"

namespace pflow {

namespace {

template <typename T>
void append_le(Bytes& out, T v) {
  const auto bits = std::bit_cast<std::array<std::uint8_t, sizeof(T)>>(v);
  out.insert(out.end(), bits.begin(), bits.end());
}

void clear_padding_bits(Bytes& bitmap, std::size_t nbits) {
  if (nbits % 8 != 0 && !bitmap.empty()) {
    bitmap.back() &= static_cast<std::uint8_t>((1u << (nbits % 8)) - 1u);
  }
}

Bytes all_valid(std::size_t n) {
  Bytes v(validity_bytes(n), 0xFF);
  clear_padding_bits(v, n);
  return v;
}

Bytes validity_from(const std::vector<bool>& valid, std::size_t n) {
  if (valid.empty()) return all_valid(n);
  if (valid.size() != n) {
    throw Error(ErrorCode::LengthMismatch, "validity has " + std::to_string(valid.size()) +
                                               " entries for " + std::to_string(n) + " values");
  }
  Bytes v(validity_bytes(n), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i]) v[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
  }
  return v;
}

template <typename T>
Bytes raw_bytes(std::span<const T> values) {
  Bytes out(values.size_bytes());
  if (!out.empty()) std::memcpy(out.data(), values.data(), out.size());
  return out;
}

// Appends nbits bits of src to a bitmap currently holding dst_bits bits.
void append_bits(Bytes& dst, std::size_t dst_bits, std::span<const std::uint8_t> src, std::size_t nbits) {
  dst.resize(validity_bytes(dst_bits + nbits), 0);
  if (dst_bits % 8 == 0) {
    std::memcpy(dst.data() + dst_bits / 8, src.data(), validity_bytes(nbits));
    clear_padding_bits(dst, dst_bits + nbits);
    return;
  }
  // Continue from the partially filled last byte.
  std::uint8_t* base = dst.data() + dst_bits / 8;
  const unsigned lead = static_cast<unsigned>(dst_bits % 8);
  const std::uint8_t carry = static_cast<std::uint8_t>(*base & ((1u << lead) - 1u));
  *base = 0;
  kernels::detail::BitAppender out(base);
  out.append(carry, lead);
  const std::size_t words = (nbits + 63) / 64;
  for (std::size_t w = 0; w < words; ++w) {
    const std::size_t take = std::min<std::size_t>(64, nbits - w * 64);
    out.append(kernels::detail::load_word(src, w) & kernels::detail::low_bits(take), static_cast<unsigned>(take));
  }
}

// Float64 total order with NaN greatest; NaNs compare equal to each other.
int compare_double(double a, double b) noexcept {
  const bool an = std::isnan(a);
  const bool bn = std::isnan(b);
  if (an || bn) return an == bn ? 0 : (an ? 1 : -1);
  return a < b ? -1 : (b < a ? 1 : 0);
}

}  // namespace

std::string_view dtype_name(DataType t) noexcept {
  switch (t) {
    case DataType::Int64:
      return "int64";
    case DataType::Float64:
      return "float64";
    case DataType::Utf8:
      return "utf8";
  }
  return "unknown";
}

std::optional<DataType> parse_dtype(std::string_view name) noexcept {
  if (name == "int64") return DataType::Int64;
  if (name == "float64") return DataType::Float64;
  if (name == "utf8") return DataType::Utf8;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Schema

Schema::Schema(std::vector<Field> fields) : fields_(std::move(fields)) {
  if (fields_.empty()) throw Error(ErrorCode::InvalidSchema, "schema needs at least one field");
  std::unordered_set<std::string_view> seen;
  for (const Field& f : fields_) {
    if (f.name.empty()) throw Error(ErrorCode::InvalidSchema, "field names must be non-empty");
    if (!seen.insert(f.name).second) throw Error(ErrorCode::InvalidSchema, "duplicate field name '" + f.name + "'");
  }
}

std::optional<std::size_t> Schema::index_of(std::string_view name) const noexcept {
  for (std::size_t i = 0; i < fields_.size(); ++i) {
    if (fields_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::require(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error(ErrorCode::UnknownField, "no field named '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Bitmap

Bitmap::Bitmap(std::size_t nbits, bool value) : bytes_(validity_bytes(nbits), value ? 0xFF : 0x00), nbits_(nbits) {
  clear_padding();
}

Bitmap Bitmap::from_bytes(Bytes bytes, std::size_t nbits) {
  if (bytes.size() != validity_bytes(nbits)) {
    throw Error(ErrorCode::LengthMismatch, "bitmap of " + std::to_string(nbits) + " bits needs " +
                                               std::to_string(validity_bytes(nbits)) + " bytes");
  }
  Bitmap b;
  b.bytes_ = std::move(bytes);
  b.nbits_ = nbits;
  b.clear_padding();
  return b;
}

void Bitmap::set(std::size_t i, bool v) noexcept {
  const auto bit = static_cast<std::uint8_t>(1u << (i & 7));
  if (v) {
    bytes_[i >> 3] |= bit;
  } else {
    bytes_[i >> 3] &= static_cast<std::uint8_t>(~bit);
  }
}

std::size_t Bitmap::count() const noexcept { return kernels::active().popcount(bytes_, nbits_); }

Bitmap Bitmap::operator~() const {
  Bitmap out = *this;
  for (auto& b : out.bytes_) b = static_cast<std::uint8_t>(~b);
  out.clear_padding();
  return out;
}

Bitmap Bitmap::operator&(const Bitmap& other) const {
  if (other.nbits_ != nbits_) throw Error(ErrorCode::MaskLengthMismatch, "bitmap sizes differ");
  Bitmap out = *this;
  for (std::size_t i = 0; i < out.bytes_.size(); ++i) out.bytes_[i] &= other.bytes_[i];
  return out;
}

void Bitmap::clear_padding() noexcept { clear_padding_bits(bytes_, nbits_); }

// ---------------------------------------------------------------------------
// Column

Column::Column(DataType dtype, std::size_t length, Bytes validity, Bytes offsets, Bytes data)
    : dtype_(dtype),
      length_(length),
      validity_(std::make_shared<const Bytes>(std::move(validity))),
      offsets_(std::make_shared<const Bytes>(std::move(offsets))),
      data_(std::make_shared<const Bytes>(std::move(data))) {}

Column Column::from_buffers(DataType dtype, std::size_t length, Bytes validity, Bytes offsets, Bytes data) {
  if (validity.size() != validity_bytes(length)) {
    throw Error(ErrorCode::LengthMismatch, "validity buffer has " + std::to_string(validity.size()) +
                                               " bytes, expected " + std::to_string(validity_bytes(length)));
  }
  clear_padding_bits(validity, length);
  if (dtype == DataType::Utf8) {
    if (offsets.size() != (length + 1) * 4) {
      throw Error(ErrorCode::LengthMismatch, "offsets buffer has " + std::to_string(offsets.size()) +
                                                 " bytes, expected " + std::to_string((length + 1) * 4));
    }
    std::uint32_t prev = 0;
    for (std::size_t i = 0; i <= length; ++i) {
      std::uint32_t off;
      std::memcpy(&off, offsets.data() + 4 * i, 4);
      if ((i == 0 && off != 0) || off < prev) {
        throw Error(ErrorCode::BadOffsets, "offsets must start at 0 and be non-decreasing", i);
      }
      prev = off;
    }
    if (data.size() != prev) {
      throw Error(ErrorCode::BadOffsets, "string data has " + std::to_string(data.size()) +
                                             " bytes, offsets end at " + std::to_string(prev));
    }
  } else {
    if (!offsets.empty()) throw Error(ErrorCode::LengthMismatch, "numeric columns have no offsets buffer");
    if (data.size() != length * 8) {
      throw Error(ErrorCode::LengthMismatch, "data buffer has " + std::to_string(data.size()) +
                                                 " bytes, expected " + std::to_string(length * 8));
    }
  }
  return Column(dtype, length, std::move(validity), std::move(offsets), std::move(data));
}

Column Column::int64(std::span<const std::int64_t> values, const std::vector<bool>& valid) {
  return Column(DataType::Int64, values.size(), validity_from(valid, values.size()), {}, raw_bytes(values));
}

Column Column::float64(std::span<const double> values, const std::vector<bool>& valid) {
  return Column(DataType::Float64, values.size(), validity_from(valid, values.size()), {}, raw_bytes(values));
}

Column Column::utf8(std::span<const std::string> values, const std::vector<bool>& valid) {
  Bytes validity = validity_from(valid, values.size());
  ColumnBuilder b(DataType::Utf8, values.size());
  for (const auto& s : values) b.append_utf8(s);
  Column c = b.finish();
  return Column(DataType::Utf8, values.size(), std::move(validity), Bytes(c.offsets_->begin(), c.offsets_->end()),
                Bytes(c.data_->begin(), c.data_->end()));
}

std::size_t Column::null_count() const noexcept {
  return length_ - kernels::active().popcount(*validity_, length_);
}

std::span<const std::int64_t> Column::int64_values() const noexcept {
  return {reinterpret_cast<const std::int64_t*>(data_->data()), dtype_ == DataType::Utf8 ? 0 : length_};
}

std::span<const double> Column::float64_values() const noexcept {
  return {reinterpret_cast<const double*>(data_->data()), dtype_ == DataType::Utf8 ? 0 : length_};
}

std::span<const std::uint64_t> Column::words() const noexcept {
  return {reinterpret_cast<const std::uint64_t*>(data_->data()), dtype_ == DataType::Utf8 ? 0 : length_};
}

std::span<const std::uint32_t> Column::utf8_offsets() const noexcept {
  return {reinterpret_cast<const std::uint32_t*>(offsets_->data()), offsets_->size() / 4};
}

std::string_view Column::utf8_value(std::size_t row) const noexcept {
  const auto offs = utf8_offsets();
  return {reinterpret_cast<const char*>(data_->data()) + offs[row], offs[row + 1] - offs[row]};
}

std::span<const std::uint8_t> Column::buffer(std::size_t k) const {
  if (k == 0) return *validity_;
  if (dtype_ == DataType::Utf8) {
    if (k == 1) return *offsets_;
    if (k == 2) return *data_;
  } else if (k == 1) {
    return *data_;
  }
  throw Error(ErrorCode::InvalidArgument, "buffer index " + std::to_string(k) + " out of range");
}

bool Column::operator==(const Column& other) const noexcept {
  return dtype_ == other.dtype_ && length_ == other.length_ && *validity_ == *other.validity_ &&
         *offsets_ == *other.offsets_ && *data_ == *other.data_;
}

// ---------------------------------------------------------------------------
// ColumnBuilder

ColumnBuilder::ColumnBuilder(DataType dtype, std::size_t reserve) : dtype_(dtype) {
  validity_.reserve(validity_bytes(reserve));
  if (dtype_ == DataType::Utf8) {
    offsets_.reserve((reserve + 1) * 4);
    append_le<std::uint32_t>(offsets_, 0);
  } else {
    data_.reserve(reserve * 8);
  }
}

void ColumnBuilder::push_valid(bool valid) {
  if (length_ % 8 == 0) validity_.push_back(0);
  if (valid) validity_.back() |= static_cast<std::uint8_t>(1u << (length_ % 8));
  ++length_;
}

void ColumnBuilder::append_int64(std::int64_t v) {
  if (dtype_ != DataType::Int64) throw Error(ErrorCode::TypeMismatch, "append_int64 on non-int64 column");
  append_le(data_, v);
  push_valid(true);
}

void ColumnBuilder::append_float64(double v) {
  if (dtype_ != DataType::Float64) throw Error(ErrorCode::TypeMismatch, "append_float64 on non-float64 column");
  append_le(data_, v);
  push_valid(true);
}

void ColumnBuilder::append_utf8(std::string_view v) {
  if (dtype_ != DataType::Utf8) throw Error(ErrorCode::TypeMismatch, "append_utf8 on non-utf8 column");
  if (data_.size() + v.size() > UINT32_MAX) throw Error(ErrorCode::BadOffsets, "string data exceeds 4 GiB");
  data_.insert(data_.end(), v.begin(), v.end());
  append_le(offsets_, static_cast<std::uint32_t>(data_.size()));
  push_valid(true);
}

void ColumnBuilder::append_null() {
  if (dtype_ == DataType::Utf8) {
    append_le(offsets_, static_cast<std::uint32_t>(data_.size()));
  } else {
    append_le<std::uint64_t>(data_, 0);
  }
  push_valid(false);
}

void ColumnBuilder::append_from(const Column& src, std::size_t row) {
  if (src.dtype() != dtype_) throw Error(ErrorCode::TypeMismatch, "append_from with a different dtype");
  if (dtype_ == DataType::Utf8) {
    const auto s = src.utf8_value(row);
    data_.insert(data_.end(), s.begin(), s.end());
    append_le(offsets_, static_cast<std::uint32_t>(data_.size()));
  } else {
    append_le(data_, src.words()[row]);
  }
  push_valid(src.is_valid(row));
}

Column ColumnBuilder::finish() {
  Column c = Column::from_buffers(dtype_, length_, std::move(validity_), std::move(offsets_), std::move(data_));
  *this = ColumnBuilder(dtype_);
  return c;
}

// ---------------------------------------------------------------------------
// Table

Table::Table(std::shared_ptr<const Schema> schema, std::vector<Column> columns, std::size_t nrows)
    : schema_(std::move(schema)), columns_(std::move(columns)), nrows_(nrows) {}

bool Table::operator==(const Table& other) const noexcept {
  return nrows_ == other.nrows_ && schema() == other.schema() && columns_ == other.columns_;
}

Table new_table(Schema schema, std::vector<Column> columns) {
  if (columns.size() != schema.size()) {
    throw Error(ErrorCode::SchemaMismatch, "schema has " + std::to_string(schema.size()) + " fields but " +
                                               std::to_string(columns.size()) + " columns were given");
  }
  const std::size_t nrows = columns.front().length();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const Field& f = schema.field(i);
    const Column& c = columns[i];
    if (c.length() != nrows) {
      throw Error(ErrorCode::LengthMismatch, "column '" + f.name + "' has " + std::to_string(c.length()) +
                                                 " rows, expected " + std::to_string(nrows),
                  i);
    }
    if (c.dtype() != f.dtype) {
      throw Error(ErrorCode::TypeMismatch, "column '" + f.name + "' is " + std::string(dtype_name(c.dtype())) +
                                               ", field declares " + std::string(dtype_name(f.dtype)),
                  i);
    }
    if (!f.nullable && c.null_count() != 0) {
      throw Error(ErrorCode::NullViolation, "non-nullable field '" + f.name + "' contains nulls", i);
    }
  }
  return Table(std::make_shared<const Schema>(std::move(schema)), std::move(columns), nrows);
}

Table empty_table(const Schema& schema) {
  std::vector<Column> cols;
  cols.reserve(schema.size());
  for (const Field& f : schema.fields()) cols.push_back(ColumnBuilder(f.dtype).finish());
  return new_table(schema, std::move(cols));
}

TableBuilder::TableBuilder(Schema schema, std::size_t reserve) : schema_(std::move(schema)) {
  builders_.reserve(schema_.size());
  for (const Field& f : schema_.fields()) builders_.emplace_back(f.dtype, reserve);
}

void TableBuilder::append_row_from(const Table& src, std::size_t row) {
  for (std::size_t c = 0; c < builders_.size(); ++c) builders_[c].append_from(src.column(c), row);
}

Table TableBuilder::finish() {
  std::vector<Column> cols;
  cols.reserve(builders_.size());
  for (auto& b : builders_) cols.push_back(b.finish());
  return new_table(schema_, std::move(cols));
}

// ---------------------------------------------------------------------------
// Layout

std::string_view buffer_role_name(BufferRole role) noexcept {
  switch (role) {
    case BufferRole::Validity:
      return "validity";
    case BufferRole::Offsets:
      return "offsets";
    case BufferRole::Data:
      return "data";
  }
  return "unknown";
}

std::vector<BufferSlot> buffer_layout(const Table& table) {
  std::vector<BufferSlot> out;
  out.reserve(buffer_count(table.schema()));
  for (std::size_t i = 0; i < table.num_columns(); ++i) {
    const Column& c = table.column(i);
    out.push_back({i, BufferRole::Validity, c.validity().size()});
    if (c.dtype() == DataType::Utf8) out.push_back({i, BufferRole::Offsets, c.offsets_bytes().size()});
    out.push_back({i, BufferRole::Data, c.data().size()});
  }
  return out;
}

std::size_t buffer_count(const Schema& schema) noexcept {
  std::size_t n = 0;
  for (const Field& f : schema.fields()) n += f.dtype == DataType::Utf8 ? 3 : 2;
  return n;
}

// ---------------------------------------------------------------------------
// Row operations

Table select(const Table& table, const Bitmap& mask) {
  if (mask.size() != table.nrows()) {
    throw Error(ErrorCode::MaskLengthMismatch, "mask has " + std::to_string(mask.size()) + " bits for " +
                                                   std::to_string(table.nrows()) + " rows");
  }
  const auto& k = kernels::active();
  const std::size_t n = table.nrows();
  const std::size_t selected = k.popcount(mask.bytes(), n);

  std::vector<Column> cols;
  cols.reserve(table.num_columns());
  for (const Column& src : table.columns()) {
    Bytes validity(validity_bytes(selected), 0);
    k.compress_bits(src.validity(), mask.bytes(), n, validity.data());

    if (src.dtype() != DataType::Utf8) {
      Bytes data(selected * 8);
      k.compress64(src.words(), mask.bytes(), reinterpret_cast<std::uint64_t*>(data.data()));
      cols.push_back(Column::from_buffers(src.dtype(), selected, std::move(validity), {}, std::move(data)));
      continue;
    }

    const auto offs = src.utf8_offsets();
    const auto bytes = src.data();
    Bytes offsets;
    offsets.reserve((selected + 1) * 4);
    append_le<std::uint32_t>(offsets, 0);
    Bytes data;
    for (std::size_t w = 0; w < (n + 63) / 64; ++w) {
      std::uint64_t m = kernels::detail::load_word(mask.bytes(), w);
      while (m != 0) {
        const std::size_t row = w * 64 + static_cast<std::size_t>(std::countr_zero(m));
        m &= m - 1;
        data.insert(data.end(), bytes.begin() + offs[row], bytes.begin() + offs[row + 1]);
        append_le(offsets, static_cast<std::uint32_t>(data.size()));
      }
    }
    cols.push_back(Column::from_buffers(DataType::Utf8, selected, std::move(validity), std::move(offsets),
                                        std::move(data)));
  }
  return new_table(table.schema(), std::move(cols));
}

Table take(const Table& table, std::span<const std::size_t> rows) {
  for (std::size_t r : rows) {
    if (r >= table.nrows()) throw Error(ErrorCode::InvalidArgument, "row " + std::to_string(r) + " out of range");
  }
  std::vector<Column> cols;
  cols.reserve(table.num_columns());
  for (const Column& src : table.columns()) {
    const std::size_t n = rows.size();
    Bytes validity(validity_bytes(n), 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (src.is_valid(rows[i])) validity[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    }
    if (src.dtype() != DataType::Utf8) {
      Bytes data(n * 8);
      auto* out = reinterpret_cast<std::uint64_t*>(data.data());
      const auto words = src.words();
      for (std::size_t i = 0; i < n; ++i) out[i] = words[rows[i]];
      cols.push_back(Column::from_buffers(src.dtype(), n, std::move(validity), {}, std::move(data)));
    } else {
      Bytes offsets;
      offsets.reserve((n + 1) * 4);
      append_le<std::uint32_t>(offsets, 0);
      Bytes data;
      for (std::size_t i = 0; i < n; ++i) {
        const auto s = src.utf8_value(rows[i]);
        data.insert(data.end(), s.begin(), s.end());
        append_le(offsets, static_cast<std::uint32_t>(data.size()));
      }
      cols.push_back(Column::from_buffers(DataType::Utf8, n, std::move(validity), std::move(offsets),
                                          std::move(data)));
    }
  }
  return new_table(table.schema(), std::move(cols));
}

Table slice(const Table& table, std::size_t offset, std::size_t length) {
  offset = std::min(offset, table.nrows());
  length = std::min(length, table.nrows() - offset);
  if (offset == 0 && length == table.nrows()) return table;
  std::vector<std::size_t> rows(length);
  std::iota(rows.begin(), rows.end(), offset);
  return take(table, rows);
}

Table concat(std::span<const Table> tables) {
  if (tables.empty()) throw Error(ErrorCode::EmptyList, "concat of an empty list");
  const Schema& schema = tables.front().schema();
  std::size_t total = 0;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    if (!(tables[t].schema() == schema)) throw Error(ErrorCode::SchemaMismatch, "concat inputs differ in schema", t);
    total += tables[t].nrows();
  }
  if (tables.size() == 1) return tables.front();

  std::vector<Column> cols;
  cols.reserve(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const DataType dtype = schema.field(c).dtype;
    Bytes validity;
    validity.reserve(validity_bytes(total));
    Bytes offsets;
    Bytes data;
    std::size_t rows_so_far = 0;
    if (dtype == DataType::Utf8) {
      offsets.reserve((total + 1) * 4);
      append_le<std::uint32_t>(offsets, 0);
    } else {
      data.reserve(total * 8);
    }
    for (const Table& t : tables) {
      const Column& src = t.column(c);
      append_bits(validity, rows_so_far, src.validity(), src.length());
      if (dtype == DataType::Utf8) {
        const auto base = static_cast<std::uint64_t>(data.size());
        if (base + src.data().size() > UINT32_MAX) throw Error(ErrorCode::BadOffsets, "string data exceeds 4 GiB");
        const auto offs = src.utf8_offsets();
        for (std::size_t i = 1; i < offs.size(); ++i) {
          append_le(offsets, static_cast<std::uint32_t>(base + offs[i]));
        }
      }
      data.insert(data.end(), src.data().begin(), src.data().end());
      rows_so_far += src.length();
    }
    validity.resize(validity_bytes(total), 0);
    cols.push_back(Column::from_buffers(dtype, total, std::move(validity), std::move(offsets), std::move(data)));
  }
  return new_table(schema, std::move(cols));
}

std::vector<std::size_t> sort_indices(const Table& table, std::span<const std::string> keys) {
  std::vector<const Column*> key_cols;
  key_cols.reserve(keys.size());
  for (const auto& k : keys) {
    const Column& col = table.column(table.schema().require(k));
    if (col.null_count() != 0) throw Error(ErrorCode::NullKey, "sort key '" + k + "' contains nulls");
    key_cols.push_back(&col);
  }

  std::vector<std::size_t> perm(table.nrows());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    for (const Column* col : key_cols) {
      int cmp = 0;
      switch (col->dtype()) {
        case DataType::Int64: {
          const auto v = col->int64_values();
          cmp = v[a] < v[b] ? -1 : (v[b] < v[a] ? 1 : 0);
          break;
        }
        case DataType::Float64: {
          const auto v = col->float64_values();
          cmp = compare_double(v[a], v[b]);
          break;
        }
        case DataType::Utf8: {
          const auto sa = col->utf8_value(a);
          const auto sb = col->utf8_value(b);
          cmp = sa.compare(sb);
          break;
        }
      }
      if (cmp != 0) return cmp < 0;
    }
    return false;
  });
  return perm;
}

Table sort_by(const Table& table, std::span<const std::string> keys) {
  const auto perm = sort_indices(table, keys);
  if (std::is_sorted(perm.begin(), perm.end())) return table;
  return take(table, perm);
}

}  // namespace pflow
