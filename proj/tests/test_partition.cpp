#include "pflow/partition.hpp"
#include "pflow/wire.hpp"
#include "pflow/workbench.hpp"
#include "support.hpp"

using namespace pflow;
using namespace pflow::partition;

namespace {

PartitionSpec spec(unsigned bits, bool hash = false, NullPolicy policy = NullPolicy::Reject) {
  PartitionSpec s;
  s.bits = bits;
  s.hash_ids = hash;
  s.null_policy = policy;
  return s;
}

std::vector<std::int64_t> ids_of(const Table& t) {
  const auto v = t.column("id").int64_values();
  return {v.begin(), v.end()};
}

// Expected part of each row, straight from the bit rule.
std::size_t expected_part(const Table& t, std::size_t r, const PartitionSpec& s) {
  const Column& id = t.column(s.id_field);
  if (!id.is_valid(r)) return 0;
  std::uint64_t v = static_cast<std::uint64_t>(id.int64_values()[r]);
  if (s.hash_ids) v = testing::mix_oracle(v);
  return (v >> s.bit_offset) & ((1u << s.bits) - 1);
}

}  // namespace

TEST_CASE("partition_index examples") {
  CHECK(partition_index(13, 2, false) == 1);
  CHECK(partition_index(8, 3, false) == 0);
  CHECK(partition_index(-1, 3, false) == 7);
  CHECK(partition_index(0b110100, 2, false, 2) == 1);
  for (std::int64_t id : {0LL, 1LL, -5LL, 123456789LL}) {
    CHECK(partition_index(id, 4, true) == (testing::mix_oracle(static_cast<std::uint64_t>(id)) & 15));
  }
}

TEST_CASE("split examples") {
  const auto two = split(testing::int64_table({0, 1, 2, 3}), spec(1));
  CHECK(two.counts == std::vector<std::size_t>{2, 2});
  CHECK(ids_of(two.parts[0]) == std::vector<std::int64_t>{0, 2});
  CHECK(ids_of(two.parts[1]) == std::vector<std::int64_t>{1, 3});

  const auto four = split(testing::int64_table({0, 1, 2, 3, 4, 5, 6, 7}), spec(2));
  CHECK(four.counts == std::vector<std::size_t>{2, 2, 2, 2});

  const Table particles = workbench::gen_dataset({workbench::DatasetKind::Particles, 100000, 42});
  const auto p = split(particles, spec(2));
  CHECK(std::count_if(p.counts.begin(), p.counts.end(), [](std::size_t c) { return c > 0; }) == 3);
}

TEST_CASE("scatter_oracle examples") {
  const Table empty = testing::int64_table({});
  const auto e = scatter_oracle(empty, spec(3));
  CHECK(e.parts.size() == 8);
  for (const Table& t : e.parts) CHECK(t.nrows() == 0);

  const auto same = scatter_oracle(testing::int64_table({6, 6, 6, 6}), spec(2));
  CHECK(same.counts == std::vector<std::size_t>{0, 0, 4, 0});
}

TEST_CASE("split errors") {
  const Table t = testing::int64_table({1, 2});
  PartitionSpec s = spec(1);
  s.id_field = "missing";
  CHECK_CODE(split(t, s), ErrorCode::UnknownField);

  const std::vector<double> f = {1.0};
  const Table floats = new_table(Schema({{"id", DataType::Float64, false}}), {Column::float64(f)});
  CHECK_CODE(split(floats, spec(1)), ErrorCode::WrongIdType);

  const std::vector<std::int64_t> v = {1, 2, 3};
  const Table nulls = new_table(Schema({{"id", DataType::Int64, true}}), {Column::int64(v, {true, false, true})});
  CHECK_CODE(split(nulls, spec(1)), ErrorCode::NullId);
  CHECK_CODE(scatter_oracle(nulls, spec(1)), ErrorCode::NullId);
  const auto routed = split(nulls, spec(1, false, NullPolicy::RouteToZero));
  CHECK(routed.counts == std::vector<std::size_t>{1, 2});

  CHECK_CODE(split(t, spec(0)), ErrorCode::InvalidArgument);
  CHECK_CODE(split(t, spec(5)), ErrorCode::InvalidArgument);
}

TEST_CASE("split equals the scatter oracle and the bit rule") {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 120; ++trial) {
    testing::RandomTableOptions opt;
    opt.nullable_id = trial % 3 == 0;
    opt.extra_columns = rng() % 5;
    opt.id_range = trial % 2 ? 1000 : (std::int64_t{1} << 40);
    const Table t = testing::random_table(rng, trial < 4 ? trial : rng() % 3000, opt);
    PartitionSpec s = spec(1 + rng() % 4, rng() % 2 == 0, NullPolicy::RouteToZero);
    s.bit_offset = static_cast<unsigned>(rng() % 8);
    CAPTURE(trial);

    const auto got = split(t, s);
    const auto want = scatter_oracle(t, s);
    REQUIRE(got.parts.size() == s.partitions());
    CHECK(got.counts == want.counts);
    for (std::size_t p = 0; p < got.parts.size(); ++p) {
      CHECK(got.parts[p] == want.parts[p]);
      std::vector<std::string> rows;
      for (std::size_t r = 0; r < t.nrows(); ++r) {
        if (expected_part(t, r, s) == p) rows.push_back(testing::row_key(t, r));
      }
      CHECK(testing::row_list(got.parts[p]) == rows);
    }
    std::size_t total = 0;
    for (auto c : got.counts) total += c;
    CHECK(total == t.nrows());
  }
}

TEST_CASE("skew") {
  CHECK(skew({2, 2, 2, 2}) == doctest::Approx(1.0));
  CHECK(skew({4, 0, 0, 4}) == doctest::Approx(2.0));
  CHECK(skew({8, 0, 0, 0}) == doctest::Approx(4.0));
  CHECK_CODE(skew({0, 0}), ErrorCode::EmptyInput);
  CHECK_CODE(skew({}), ErrorCode::EmptyInput);
}

TEST_CASE("hashing reduces particle skew") {
  const Table t = workbench::gen_dataset({workbench::DatasetKind::Particles, 20000, 42});
  const double plain = skew(split(t, spec(2)).counts);
  const double hashed = skew(split(t, spec(2, true)).counts);
  CHECK(hashed < plain);
  CHECK(hashed < 1.1);
}

TEST_CASE("measure_sizes matches serialized parts") {
  std::mt19937_64 rng(83);
  const Table t = testing::random_table(rng, 2000);
  auto set = split(t, spec(2));
  measure_sizes(set, CodecId::Zstd);
  REQUIRE(set.serialized_sizes.has_value());
  for (std::size_t p = 0; p < set.parts.size(); ++p) {
    CHECK((*set.serialized_sizes)[p] == wire::serialize(set.parts[p], CodecId::Zstd).size());
  }
}
