#include "pflow/wire.hpp"
#include "pflow/workbench.hpp"
#include "support.hpp"

using namespace pflow;

namespace {

const CodecId kCodecs[] = {CodecId::None, CodecId::Lz4Frame, CodecId::Zstd, CodecId::Deflate};

void put(Bytes& b, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get(const Bytes& b, std::size_t at, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= std::uint64_t{b[at + i]} << (8 * i);
  return v;
}

struct Walk {
  std::size_t end = 0;
  std::size_t buffers = 0;
  bool stored_le_uncompressed = true;
};

// Independent walk over the framing, used for size accounting.
Walk walk(const Bytes& env) {
  Walk w;
  std::size_t at = 4 + 2 + 1;
  const std::size_t schema_len = get(env, at, 4);
  at += 4 + schema_len + 8;
  w.buffers = get(env, at, 4);
  at += 4;
  for (std::size_t i = 0; i < w.buffers; ++i) {
    const std::uint64_t ulen = get(env, at + 1, 8);
    const std::uint64_t slen = get(env, at + 9, 8);
    w.stored_le_uncompressed = w.stored_le_uncompressed && slen <= ulen;
    at += 17 + (slen + 7) / 8 * 8;
  }
  w.end = at;
  return w;
}

}  // namespace

TEST_CASE("envelope bytes for a tiny table") {
  const Table t = testing::int64_table({1, 2});
  const std::string json = R"({"fields":[{"dtype":"int64","name":"id","nullable":false}]})";
  CHECK(wire::schema_to_json(t.schema()) == json);

  Bytes want = {'P', 'T', 'B', 'L'};
  put(want, 1, 2);
  put(want, 0, 1);
  put(want, json.size(), 4);
  want.insert(want.end(), json.begin(), json.end());
  put(want, 2, 8);
  put(want, 2, 4);
  put(want, 1, 1);  // validity: raw
  put(want, 1, 8);
  put(want, 1, 8);
  put(want, 0x03, 1);
  put(want, 0, 7);
  put(want, 1, 1);  // data: raw
  put(want, 16, 8);
  put(want, 16, 8);
  put(want, 1, 8);
  put(want, 2, 8);
  CHECK(wire::serialize(t, CodecId::None) == want);
  // Small buffers stay raw whatever the codec; only the codec byte differs.
  Bytes zstd = want;
  zstd[6] = 2;
  CHECK(wire::serialize(t, CodecId::Zstd) == zstd);
}

TEST_CASE("zero-row table") {
  const Table t = testing::int64_table({});
  const Bytes env = wire::serialize(t, CodecId::None);
  const auto info = wire::inspect(env);
  REQUIRE(info.buffers.size() == 2);
  CHECK(info.buffers[0].uncompressed_len == 0);
  CHECK(info.buffers[1].uncompressed_len == 0);
  CHECK(info.nrows == 0);
  CHECK(wire::deserialize(env) == t);
}

TEST_CASE("constant column compresses under zstd") {
  const Table t = testing::int64_table(std::vector<std::int64_t>(100000, 77));
  const auto info = wire::inspect(wire::serialize(t, CodecId::Zstd));
  REQUIRE(info.buffers.size() == 2);
  CHECK_FALSE(info.buffers[1].raw);
  CHECK(info.buffers[1].stored_len < info.buffers[1].uncompressed_len);
}

TEST_CASE("round trip, determinism and size accounting on random tables") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    testing::RandomTableOptions opt;
    opt.extra_columns = rng() % 8;
    const std::size_t n = trial < 3 ? static_cast<std::size_t>(trial) : rng() % 5000;
    const Table t = testing::random_table(rng, n, opt);
    for (CodecId c : kCodecs) {
      CAPTURE(codec_name(c));
      const Bytes one = wire::serialize(t, c, wire::Parallelism::fixed(1));
      const Bytes eight = wire::serialize(t, c, wire::Parallelism::fixed(8));
      CHECK(one == eight);
      CHECK(wire::serialize(t, c) == one);
      CHECK(wire::deserialize(one, wire::Parallelism::fixed(1)) == t);
      CHECK(wire::deserialize(one, wire::Parallelism::fixed(8)) == t);

      const Walk w = walk(one);
      CHECK(w.end == one.size());
      CHECK(w.buffers == buffer_count(t.schema()));
      CHECK(w.stored_le_uncompressed);
      if (c == CodecId::None) CHECK(one.size() == wire::uncompressed_envelope_size(t, t.nrows()));
    }
  }
}

TEST_CASE("generated datasets round-trip") {
  for (auto kind : {workbench::DatasetKind::Particles, workbench::DatasetKind::Planes, workbench::DatasetKind::Ships}) {
    const Table t = workbench::gen_dataset({kind, 5000, 3});
    for (CodecId c : kCodecs) CHECK(wire::deserialize(wire::serialize(t, c)) == t);
  }
}

TEST_CASE("malformed envelopes") {
  std::mt19937_64 rng(37);
  const Table t = testing::random_table(rng, 300);
  const Bytes env = wire::serialize(t, CodecId::Zstd);

  Bytes bad = env;
  bad[0] = 'X';
  bad[1] = 'X';
  bad[2] = 'X';
  bad[3] = 'X';
  CHECK_CODE(wire::deserialize(bad), ErrorCode::BadMagic);

  bad = env;
  bad[4] = 9;
  CHECK_CODE(wire::deserialize(bad), ErrorCode::UnsupportedVersion);

  CHECK_CODE(wire::deserialize(ByteSpan(env.data(), env.size() - 1)), ErrorCode::Truncated);
  for (std::size_t cut = 0; cut < env.size(); cut += 1 + env.size() / 97) {
    CHECK_CODE(wire::deserialize(ByteSpan(env.data(), cut)), ErrorCode::Truncated);
  }

  // Wrong buffer count for the schema.
  const auto info = wire::inspect(env);
  bad = env;
  const std::size_t count_at = info.header_size - 4;
  bad[count_at] = static_cast<std::uint8_t>(bad[count_at] - 1);
  CHECK_CODE(wire::deserialize(bad), ErrorCode::LayoutMismatch);

  // Corrupted compressed payload.
  for (const auto& b : info.buffers) {
    if (b.raw || b.stored_len < 16) continue;
    bad = env;
    for (std::size_t i = 0; i < 8; ++i) bad[b.payload_offset + i] ^= 0xA5;
    CHECK(testing::error_of([&] { (void)wire::deserialize(bad); }).has_value());
    break;
  }
}

TEST_CASE("buffer_tasks") {
  CHECK(wire::buffer_tasks(testing::int64_table({1})) == 2);
  CHECK(wire::buffer_tasks(workbench::gen_dataset({workbench::DatasetKind::Particles, 0})) == 20);
  CHECK(wire::buffer_tasks(workbench::gen_dataset({workbench::DatasetKind::Ships, 0})) == 35);
}

TEST_CASE("schema JSON round trip") {
  std::mt19937_64 rng(41);
  const Table t = testing::random_table(rng, 0, {.extra_columns = 9});
  CHECK(wire::schema_from_json(wire::schema_to_json(t.schema())) == t.schema());
  CHECK_CODE(wire::schema_from_json("{"), ErrorCode::InvalidSchema);
  CHECK_CODE(wire::schema_from_json(R"({"fields":[{"name":"a","dtype":"int7","nullable":true}]})"),
             ErrorCode::InvalidSchema);
}
