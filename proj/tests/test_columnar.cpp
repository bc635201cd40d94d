#include "support.hpp"

using namespace pflow;
using testing::int64_table;

namespace {

Bytes offsets_bytes(std::vector<std::uint32_t> offs) {
  Bytes b(offs.size() * 4);
  std::memcpy(b.data(), offs.data(), b.size());
  return b;
}

Bitmap bitmap_of(std::string_view bits) {
  Bitmap m(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) m.set(i, bits[i] == '1');
  return m;
}

Bitmap random_bitmap(std::mt19937_64& rng, std::size_t n) {
  Bitmap m(n);
  for (std::size_t i = 0; i < n; ++i) m.set(i, rng() & 1);
  return m;
}

}  // namespace

TEST_CASE("validity_bytes") {
  CHECK(validity_bytes(0) == 0);
  CHECK(validity_bytes(10) == 2);
  CHECK(validity_bytes(64) == 8);
  CHECK(validity_bytes(65) == 9);
}

TEST_CASE("new_table examples") {
  const Table t = int64_table({1, 2, 3});
  CHECK(t.nrows() == 3);

  const Schema two({{"a", DataType::Int64, false}, {"b", DataType::Int64, false}});
  const std::vector<std::int64_t> three = {1, 2, 3}, four = {1, 2, 3, 4};
  CHECK_CODE(new_table(two, {Column::int64(three), Column::int64(four)}), ErrorCode::LengthMismatch);

  const std::vector<double> d = {1.0, 2.0, 3.0};
  CHECK_CODE(new_table(Schema({{"a", DataType::Int64, false}}), {Column::float64(d)}), ErrorCode::TypeMismatch);

  CHECK_CODE(Column::from_buffers(DataType::Utf8, 2, Bytes{0x03}, offsets_bytes({0, 2, 1}), Bytes{'a', 'b'}),
             ErrorCode::BadOffsets);
  CHECK_CODE(Column::from_buffers(DataType::Utf8, 2, Bytes{0x03}, offsets_bytes({1, 2, 3}), Bytes{'a', 'b', 'c'}),
             ErrorCode::BadOffsets);
  CHECK_CODE(Column::from_buffers(DataType::Utf8, 2, Bytes{0x03}, offsets_bytes({0, 1, 5}), Bytes{'a', 'b'}),
             ErrorCode::BadOffsets);

  const std::vector<std::int64_t> vals = {1, 2};
  CHECK_CODE(new_table(Schema({{"a", DataType::Int64, false}}), {Column::int64(vals, {true, false})}),
             ErrorCode::NullViolation);
  CHECK_CODE(Schema({{"a", DataType::Int64, false}, {"a", DataType::Int64, false}}), ErrorCode::InvalidSchema);
}

TEST_CASE("validity bitmap is LSB-first with cleared padding") {
  const std::vector<std::int64_t> vals = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<bool> valid(10, true);
  valid[1] = false;
  valid[9] = false;
  const Column c = Column::int64(vals, valid);
  REQUIRE(c.validity().size() == 2);
  CHECK(c.validity()[0] == 0xFD);
  CHECK(c.validity()[1] == 0x01);
  CHECK(c.null_count() == 2);

  // Padding bits above the row count are cleared on construction.
  const Column p = Column::from_buffers(DataType::Int64, 3, Bytes{0xFF}, {}, Bytes(24, 0));
  CHECK(p.validity()[0] == 0x07);

  // Non-nullable data still carries an all-ones bitmap.
  const Table t = int64_table({4, 5, 6});
  CHECK(t.column(0).validity()[0] == 0x07);
}

TEST_CASE("buffer_layout examples") {
  std::vector<Field> ten;
  std::vector<Column> cols;
  const std::vector<std::int64_t> v = {1, 2};
  for (int i = 0; i < 10; ++i) {
    ten.push_back({"f" + std::to_string(i), DataType::Int64, false});
    cols.push_back(Column::int64(v));
  }
  CHECK(buffer_layout(new_table(Schema(ten), cols)).size() == 20);

  std::vector<Field> seventeen;
  for (int i = 0; i < 16; ++i) seventeen.push_back({"n" + std::to_string(i), DataType::Float64, true});
  seventeen.push_back({"s", DataType::Utf8, true});
  const Schema s17(seventeen);
  CHECK(buffer_layout(empty_table(s17)).size() == 35);
  CHECK(buffer_count(s17) == 35);

  const auto one = buffer_layout(empty_table(Schema({{"s", DataType::Utf8, true}})));
  REQUIRE(one.size() == 3);
  CHECK(one[0] == BufferSlot{0, BufferRole::Validity, 0});
  CHECK(one[1] == BufferSlot{0, BufferRole::Offsets, 4});
  CHECK(one[2] == BufferSlot{0, BufferRole::Data, 0});
}

TEST_CASE("buffer_layout count on random schemas") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    testing::RandomTableOptions opt;
    opt.extra_columns = rng() % 12;
    const Table t = testing::random_table(rng, rng() % 40, opt);
    std::size_t want = 0;
    for (const Field& f : t.schema().fields()) want += f.dtype == DataType::Utf8 ? 3 : 2;
    const auto layout = buffer_layout(t);
    CHECK(layout.size() == want);
    std::vector<std::size_t> next(t.num_columns(), 0);
    for (const BufferSlot& s : layout) CHECK(s.length == t.column(s.column).buffer(next[s.column]++).size());
  }
}

TEST_CASE("select examples") {
  std::mt19937_64 rng(9);
  const Table t = testing::random_table(rng, 37);
  CHECK(select(t, Bitmap(37, true)) == t);
  const Table none = select(t, Bitmap(37, false));
  CHECK(none.nrows() == 0);
  CHECK(none.schema() == t.schema());

  const Table small = int64_table({5, 6, 7, 8});
  const Table picked = select(small, bitmap_of("1010"));
  const std::vector<std::int64_t> want = {5, 7};
  CHECK(std::ranges::equal(picked.column(0).int64_values(), want));
  CHECK_CODE(select(small, bitmap_of("101")), ErrorCode::MaskLengthMismatch);
}

TEST_CASE("select composes and partitions rows") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = trial == 0 ? 0 : rng() % (trial < 30 ? 200 : 10000);
    const Table t = testing::random_table(rng, n);
    const Bitmap m1 = random_bitmap(rng, n);
    const Bitmap m2 = random_bitmap(rng, n);

    // m2 restricted to the rows m1 kept.
    Bitmap restricted(m1.count());
    for (std::size_t i = 0, o = 0; i < n; ++i) {
      if (m1.get(i)) restricted.set(o++, m2.get(i));
    }
    CHECK(select(select(t, m1), restricted) == select(t, m1 & m2));

    const std::vector<Table> halves = {select(t, m1), select(t, ~m1)};
    CHECK(testing::row_multiset(concat(halves)) == testing::row_multiset(t));
  }
}

TEST_CASE("select matches a row-by-row copy") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = rng() % 700;
    const Table t = testing::random_table(rng, n);
    const Bitmap m = random_bitmap(rng, n);
    TableBuilder b(t.schema());
    for (std::size_t r = 0; r < n; ++r) {
      if (m.get(r)) b.append_row_from(t, r);
    }
    CHECK(select(t, m) == b.finish());
  }
}

TEST_CASE("concat examples") {
  std::mt19937_64 rng(21);
  const Table t = testing::random_table(rng, 10);
  const std::vector<Table> one = {t};
  CHECK(concat(one) == t);

  const std::vector<Table> ab = {int64_table({1, 2}), int64_table({3, 4, 5})};
  const Table c = concat(ab);
  const std::vector<std::int64_t> want = {1, 2, 3, 4, 5};
  CHECK(std::ranges::equal(c.column(0).int64_values(), want));

  const Table other = new_table(Schema({{"x", DataType::Int64, false}}), {Column::int64(want)});
  const std::vector<Table> mixed = {int64_table({1}), other};
  CHECK_CODE(concat(mixed), ErrorCode::SchemaMismatch);
  CHECK_CODE(concat(std::vector<Table>{}), ErrorCode::EmptyList);
}

TEST_CASE("concat of slices rebuilds the table") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = rng() % 500;
    const Table t = testing::random_table(rng, n);
    std::vector<Table> pieces;
    for (std::size_t at = 0; at < n || pieces.empty();) {
      const std::size_t len = rng() % 70;
      pieces.push_back(slice(t, at, len));
      at += len;
      if (at >= n) break;
    }
    CHECK(concat(pieces) == t);
  }
}

TEST_CASE("sort_by examples") {
  const Schema s({{"id", DataType::Int64, true}, {"time", DataType::Int64, false}});
  const std::vector<std::int64_t> ids = {2, 1, 2, 1}, times = {0, 5, 3, 1};
  const Table t = new_table(s, {Column::int64(ids), Column::int64(times)});
  const std::vector<std::string> keys = {"id", "time"};
  const Table sorted = sort_by(t, keys);
  const std::vector<std::int64_t> want_ids = {1, 1, 2, 2}, want_times = {1, 5, 0, 3};
  CHECK(std::ranges::equal(sorted.column(0).int64_values(), want_ids));
  CHECK(std::ranges::equal(sorted.column(1).int64_values(), want_times));
  CHECK(sort_by(sorted, keys) == sorted);

  const Table with_null = new_table(s, {Column::int64(ids, {true, false, true, true}), Column::int64(times)});
  CHECK_CODE(sort_by(with_null, keys), ErrorCode::NullKey);
  const std::vector<std::string> bad = {"nope"};
  CHECK_CODE(sort_by(t, bad), ErrorCode::UnknownField);
}

TEST_CASE("sort_by is stable and orders floats with NaN last") {
  std::mt19937_64 rng(29);
  const std::size_t n = 2000;
  std::vector<std::int64_t> key(n), tag(n);
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    key[i] = static_cast<std::int64_t>(rng() % 10) - 5;
    tag[i] = static_cast<std::int64_t>(i);
    f[i] = rng() % 20 == 0 ? std::nan("") : static_cast<double>(rng() % 7) - 3.5;
  }
  const Table t = new_table(
      Schema({{"k", DataType::Int64, false}, {"tag", DataType::Int64, false}, {"f", DataType::Float64, false}}),
      {Column::int64(key), Column::int64(tag), Column::float64(f)});

  const std::vector<std::string> by_key = {"k"};
  const Table s = sort_by(t, by_key);
  const auto k = s.column(0).int64_values();
  const auto g = s.column(1).int64_values();
  for (std::size_t i = 1; i < n; ++i) {
    REQUIRE(k[i - 1] <= k[i]);
    if (k[i - 1] == k[i]) REQUIRE(g[i - 1] < g[i]);
  }

  const std::vector<std::string> by_f = {"f"};
  const Table sf = sort_by(t, by_f);
  const auto fv = sf.column(2).float64_values();
  const auto fg = sf.column(1).int64_values();
  bool seen_nan = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(fv[i])) {
      seen_nan = true;
      if (i > 0 && std::isnan(fv[i - 1])) REQUIRE(fg[i - 1] < fg[i]);
      continue;
    }
    REQUIRE_FALSE(seen_nan);
    if (i > 0) REQUIRE(fv[i - 1] <= fv[i]);
  }
}

TEST_CASE("take and slice") {
  const Table t = int64_table({10, 11, 12, 13});
  const std::vector<std::size_t> rows = {3, 0, 3};
  const std::vector<std::int64_t> want = {13, 10, 13};
  CHECK(std::ranges::equal(take(t, rows).column(0).int64_values(), want));
  CHECK(slice(t, 2, 100).nrows() == 2);
  CHECK(slice(t, 9, 1).nrows() == 0);
}

TEST_CASE("utf8 columns expose values and nulls") {
  const std::vector<std::string> v = {"ab", "", "xyz"};
  const Column c = Column::utf8(v, {true, true, false});
  CHECK(c.utf8_value(0) == "ab");
  CHECK(c.utf8_value(1).empty());
  CHECK_FALSE(c.is_valid(2));
  const std::vector<std::uint32_t> offs(c.utf8_offsets().begin(), c.utf8_offsets().end());
  CHECK(offs.front() == 0);
  CHECK(std::is_sorted(offs.begin(), offs.end()));
}
