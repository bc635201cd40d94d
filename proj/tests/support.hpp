#pragma once

// Shared helpers for the unit tests: error-code capture, random tables and
// reference implementations that share no code with the library.

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pflow/columnar.hpp"
#include "pflow/error.hpp"

namespace testing {

using namespace pflow;

template <class Fn>
std::optional<ErrorCode> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

#define CHECK_CODE(expr, expected) CHECK(::testing::error_of([&] { (void)(expr); }) == (expected))
#define REQUIRE_CODE(expr, expected) REQUIRE(::testing::error_of([&] { (void)(expr); }) == (expected))

// Textbook bit-at-a-time CRC-32/IEEE.
inline std::uint32_t crc32_bitwise(const std::uint8_t* p, std::size_t n, std::uint32_t crc = 0) {
  crc = ~crc;
  for (std::size_t i = 0; i < n; ++i) {
    crc ^= p[i];
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

inline std::uint64_t mix_oracle(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint8_t> v(n);
  for (auto& b : v) b = static_cast<std::uint8_t>(rng());
  return v;
}

inline std::string random_string(std::mt19937_64& rng) {
  static constexpr char kChars[] = "abcXYZ019 ,\"\n-_";
  std::string s(rng() % 14, ' ');
  for (char& c : s) c = kChars[rng() % (sizeof kChars - 1)];
  return s;
}

struct RandomTableOptions {
  std::size_t extra_columns = 4;
  double null_rate = 0.05;
  bool nullable_id = false;
  bool nan = true;
  bool strings = true;
  std::int64_t id_range = 1 << 20;  // ids drawn from [-id_range, id_range]
};

// Column 0 is an Int64 "id"; the rest have random types.
inline Table random_table(std::mt19937_64& rng, std::size_t nrows, const RandomTableOptions& opt = {}) {
  std::vector<Field> fields = {{"id", DataType::Int64, opt.nullable_id}};
  for (std::size_t c = 0; c < opt.extra_columns; ++c) {
    auto t = static_cast<DataType>(rng() % (opt.strings ? 3 : 2));
    fields.push_back({"c" + std::to_string(c), t, rng() % 4 != 0});
  }
  Schema schema(fields);
  TableBuilder b(schema, nrows);
  std::bernoulli_distribution null_draw(opt.null_rate);
  for (std::size_t r = 0; r < nrows; ++r) {
    for (std::size_t c = 0; c < fields.size(); ++c) {
      ColumnBuilder& col = b.column(c);
      if (fields[c].nullable && null_draw(rng)) {
        col.append_null();
        continue;
      }
      switch (fields[c].dtype) {
        case DataType::Int64: {
          const auto span = static_cast<std::uint64_t>(opt.id_range) * 2 + 1;
          col.append_int64(static_cast<std::int64_t>(rng() % span) - opt.id_range);
          break;
        }
        case DataType::Float64: {
          double v = std::ldexp(static_cast<double>(static_cast<std::int64_t>(rng() % 2000001) - 1000000), -7);
          if (opt.nan && rng() % 50 == 0) v = std::nan("");
          col.append_float64(v);
          break;
        }
        case DataType::Utf8:
          col.append_utf8(random_string(rng));
          break;
      }
    }
  }
  return b.finish();
}

// Canonical text of one row, for multiset comparisons.
inline std::string row_key(const Table& t, std::size_t r) {
  std::string k;
  for (std::size_t c = 0; c < t.num_columns(); ++c) {
    const Column& col = t.column(c);
    k += '|';
    if (!col.is_valid(r)) {
      k += "null";
      continue;
    }
    switch (col.dtype()) {
      case DataType::Int64: k += std::to_string(col.int64_values()[r]); break;
      case DataType::Float64: k += std::to_string(std::bit_cast<std::uint64_t>(col.float64_values()[r])); break;
      case DataType::Utf8: k += std::string(col.utf8_value(r)); break;
    }
  }
  return k;
}

inline std::multiset<std::string> row_multiset(const Table& t) {
  std::multiset<std::string> s;
  for (std::size_t r = 0; r < t.nrows(); ++r) s.insert(row_key(t, r));
  return s;
}

inline std::vector<std::string> row_list(const Table& t) {
  std::vector<std::string> v;
  for (std::size_t r = 0; r < t.nrows(); ++r) v.push_back(row_key(t, r));
  return v;
}

inline Table int64_table(std::vector<std::int64_t> ids) {
  return new_table(Schema({{"id", DataType::Int64, false}}), {Column::int64(ids)});
}

}  // namespace testing
