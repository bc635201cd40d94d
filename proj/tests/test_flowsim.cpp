#include "pflow/flowsim.hpp"
#include "pflow/partition.hpp"
#include "pflow/wire.hpp"
#include "support.hpp"

using namespace pflow;
using namespace pflow::flowsim;

namespace {

const Schema kSchema({{"id", DataType::Int64, false}, {"time", DataType::Int64, false}, {"v", DataType::Float64, true}});

Table rows(const std::vector<std::int64_t>& ids, const std::vector<std::int64_t>& times) {
  std::vector<double> v(ids.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(ids[i]) * 0.5 + static_cast<double>(times[i]);
  return new_table(kSchema, {Column::int64(ids), Column::int64(times), Column::float64(v)});
}

Table random_rows(std::mt19937_64& rng, std::size_t n, std::int64_t id_space, std::int64_t t0) {
  std::vector<std::int64_t> ids(n), times(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(id_space)) - id_space / 4;
    times[i] = t0 + static_cast<std::int64_t>(rng() % 50);
  }
  return rows(ids, times);
}

TreeConfig cfg(unsigned bits, unsigned depth, std::size_t capacity, bool parallel = false) {
  TreeConfig c;
  c.bits_per_level = bits;
  c.depth = depth;
  c.capacity = capacity;
  c.parallel = parallel;
  return c;
}

// Rows with the id and a time in [t0, t1], ordered by time then arrival.
Table brute_query(const Table& all, std::int64_t id, std::int64_t t0, std::int64_t t1) {
  const auto ids = all.column("id").int64_values();
  const auto times = all.column("time").int64_values();
  std::vector<std::size_t> hits;
  for (std::size_t r = 0; r < all.nrows(); ++r) {
    if (ids[r] == id && times[r] >= t0 && times[r] <= t1) hits.push_back(r);
  }
  std::stable_sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
  return take(all, hits);
}

}  // namespace

TEST_CASE("ingest respects capacity") {
  Tree tree(cfg(1, 1, 100));
  std::vector<std::int64_t> ids(99), times(99, 0);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<std::int64_t>(i);
  tree.ingest(rows(ids, times));
  CHECK(tree.metrics().compactions == 0);
  CHECK(tree.root().buffered_rows() == 99);

  tree.ingest(rows({500}, {1}));
  CHECK(tree.metrics().compactions == 1);
  CHECK(tree.root().buffered_rows() == 0);
  CHECK(tree.stored_rows() == 100);

  const auto before = tree.metrics();
  tree.ingest(rows({}, {}));
  CHECK(tree.metrics().compactions == before.compactions);
  CHECK(tree.metrics().rows_ingested == before.rows_ingested);
  CHECK(tree.stored_rows() == 100);
}

TEST_CASE("ingest validates schemas") {
  Tree tree(cfg(1, 1, 10));
  const std::vector<std::int64_t> ids = {1};
  const Table no_time = new_table(Schema({{"id", DataType::Int64, false}}), {Column::int64(ids)});
  CHECK_CODE(tree.ingest(no_time), ErrorCode::SchemaMismatch);
  const std::vector<double> f = {1.0};
  const Table float_time = new_table(Schema({{"id", DataType::Int64, false}, {"time", DataType::Float64, false}}),
                                     {Column::int64(ids), Column::float64(f)});
  CHECK_CODE(tree.ingest(float_time), ErrorCode::SchemaMismatch);

  tree.ingest(rows({1}, {1}));
  const Table other = new_table(Schema({{"id", DataType::Int64, false}, {"time", DataType::Int64, false}}),
                                {Column::int64(ids), Column::int64(ids)});
  CHECK_CODE(tree.ingest(other), ErrorCode::SchemaMismatch);
  CHECK_CODE(Tree(cfg(0, 1, 10)), ErrorCode::InvalidArgument);
  CHECK_CODE(Tree(cfg(1, 0, 10)), ErrorCode::InvalidArgument);
  CHECK_CODE(Tree(cfg(1, 1, 0)), ErrorCode::InvalidArgument);
}

TEST_CASE("compact routes on the level's bit group") {
  const TreeConfig c = cfg(1, 2, 1000);
  ProcessingElement root(0, 0, c);
  root.buffer(rows({0, 1, 2, 3}, {0, 0, 0, 0}));
  auto msgs = root.compact();
  REQUIRE(msgs.size() == 2);
  CHECK(msgs[0].child == 0);
  CHECK(msgs[1].child == 1);
  const Table to0 = wire::deserialize(msgs[0].envelope);
  const Table to1 = wire::deserialize(msgs[1].envelope);
  CHECK(to0 == rows({0, 2}, {0, 0}));
  CHECK(to1 == rows({1, 3}, {0, 0}));
  CHECK(root.buffered_rows() == 0);

  root.buffer(rows({0, 2, 4, 8}, {1, 1, 1, 1}));
  msgs = root.compact();
  REQUIRE(msgs.size() == 1);
  CHECK(msgs[0].child == 0);

  // Level 1 element 1 splits on bit 1.
  ProcessingElement mid(1, 1, c);
  mid.buffer(rows({1, 3, 5, 7}, {0, 0, 0, 0}));
  msgs = mid.compact();
  REQUIRE(msgs.size() == 2);
  CHECK(wire::deserialize(msgs[0].envelope) == rows({1, 5}, {0, 0}));
  CHECK(wire::deserialize(msgs[1].envelope) == rows({3, 7}, {0, 0}));
}

TEST_CASE("id 3 lands in leaf 3 of a two-level binary tree") {
  Tree tree(cfg(1, 2, 1));
  tree.ingest(rows({3}, {0}));
  tree.drain();
  CHECK(tree.element(2, 3).stored_rows() == 1);
  CHECK(tree.stored_rows() == 1);
}

TEST_CASE("leaf runs and merging") {
  const TreeConfig c = cfg(1, 1, 10);
  ProcessingElement leaf(1, 1, c);
  leaf.absorb(rows({3, 1, 3}, {5, 2, 1}));
  REQUIRE(leaf.runs().size() == 1);
  CHECK(leaf.runs()[0] == rows({1, 3, 3}, {2, 1, 5}));

  for (int i = 0; i < 4; ++i) leaf.absorb(rows({7, 5}, {10 - i, i}));
  REQUIRE(leaf.runs().size() == 1);
  CHECK(leaf.merges() == 1);
  const Table& run = leaf.runs()[0];
  CHECK(run.nrows() == 11);
  const auto ids = run.column("id").int64_values();
  const auto times = run.column("time").int64_values();
  for (std::size_t r = 1; r < run.nrows(); ++r) {
    CHECK(std::pair(ids[r - 1], times[r - 1]) <= std::pair(ids[r], times[r]));
  }

  CHECK_CODE(leaf.absorb(rows({2}, {0})), ErrorCode::RoutingViolation);
}

TEST_CASE("query_track examples") {
  Tree tree(cfg(1, 2, 4));
  CHECK(tree.query_track(5, 0, 10).nrows() == 0);
  tree.ingest(rows({5, 5, 5}, {3, 1, 2}));
  tree.drain();
  const Table q = tree.query_track(5, 0, 10);
  const auto times = q.column("time").int64_values();
  CHECK(std::vector<std::int64_t>(times.begin(), times.end()) == std::vector<std::int64_t>{1, 2, 3});
  CHECK(tree.query_track(5, 2, 2).nrows() == 1);
  CHECK(tree.query_track(6, 0, 10).nrows() == 0);
  CHECK(tree.query_track(5, 10, 0).nrows() == 0);
}

TEST_CASE("conservation, routing and query oracle") {
  std::mt19937_64 rng(89);
  for (bool parallel : {false, true}) {
    const TreeConfig c = cfg(2, 2, 700, parallel);
    Tree tree(c);
    std::vector<Table> batches;
    for (int b = 0; b < 40; ++b) {
      batches.push_back(random_rows(rng, rng() % 600, 3000, b * 10));
      tree.ingest(batches.back());
    }
    const Table all = concat(batches);
    tree.drain();
    CHECK(tree.buffered_rows() == 0);
    CHECK(tree.stored_rows() == all.nrows());
    const auto m = tree.metrics();
    CHECK(m.rows_ingested == all.nrows());

    for (std::size_t leaf = 0; leaf < c.leaf_count(); ++leaf) {
      for (const Table& run : tree.element(c.depth, leaf).runs()) {
        for (std::int64_t id : run.column("id").int64_values()) {
          REQUIRE((static_cast<std::uint64_t>(id) & (c.leaf_count() - 1)) == leaf);
        }
      }
    }
    CHECK(testing::row_multiset(all) == [&] {
      std::multiset<std::string> s;
      for (std::size_t leaf = 0; leaf < c.leaf_count(); ++leaf) {
        for (const Table& run : tree.element(c.depth, leaf).runs()) {
          auto part = testing::row_multiset(run);
          s.insert(part.begin(), part.end());
        }
      }
      return s;
    }());

    const auto ids = all.column("id").int64_values();
    for (int q = 0; q < 60; ++q) {
      const std::int64_t id = q % 5 == 0 ? 99999 : ids[rng() % ids.size()];
      const std::int64_t t0 = static_cast<std::int64_t>(rng() % 400);
      const std::int64_t t1 = t0 + static_cast<std::int64_t>(rng() % 200);
      CHECK(tree.query_track(id, t0, t1) == brute_query(all, id, t0, t1));
    }
  }
}

TEST_CASE("parallel levels give the same leaves as serial") {
  std::mt19937_64 rng(97);
  std::vector<Table> batches;
  for (int b = 0; b < 20; ++b) batches.push_back(random_rows(rng, 500, 100000, b));
  Tree serial(cfg(1, 3, 900, false));
  Tree par(cfg(1, 3, 900, true));
  for (const Table& t : batches) {
    serial.ingest(t);
    par.ingest(t);
  }
  serial.drain();
  par.drain();
  for (std::size_t leaf = 0; leaf < 8; ++leaf) {
    const auto& a = serial.element(3, leaf).runs();
    const auto& b = par.element(3, leaf).runs();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  CHECK(serial.metrics().bytes_forwarded == par.metrics().bytes_forwarded);
}
