#include <filesystem>
#include <numeric>
#include <fstream>
#include <sstream>

#include "pflow/partition.hpp"
#include "pflow/wire.hpp"
#include "pflow/workbench.hpp"
#include "support.hpp"

using namespace pflow;
using namespace pflow::workbench;

namespace {

constexpr DatasetKind kKinds[] = {DatasetKind::Particles, DatasetKind::Planes, DatasetKind::Ships};

std::vector<std::size_t> low_bit_histogram(const Table& t, unsigned bits) {
  std::vector<std::size_t> h(std::size_t{1} << bits, 0);
  for (std::int64_t id : t.column("id").int64_values()) ++h[static_cast<std::uint64_t>(id) & (h.size() - 1)];
  return h;
}

Table from_csv_text(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  return read_csv(in, schema);
}

std::string to_csv_text(const Table& t) {
  std::ostringstream out;
  write_csv(t, out);
  return out.str();
}

}  // namespace

TEST_CASE("dataset schemas") {
  const Schema particles = dataset_schema(DatasetKind::Particles);
  CHECK(particles.size() == 10);
  for (const Field& f : particles.fields()) CHECK(f.dtype != DataType::Utf8);
  CHECK(particles.field(0).name == "id");
  CHECK(particles.field(0).dtype == DataType::Int64);

  const Schema planes = dataset_schema(DatasetKind::Planes);
  CHECK(planes.size() == 16);
  const Schema ships = dataset_schema(DatasetKind::Ships);
  CHECK(ships.size() == 17);
  CHECK(buffer_count(ships) == 35);
  for (const Schema* s : {&planes, &ships}) {
    CHECK(s->field(s->require("id")).dtype == DataType::Int64);
    CHECK(s->field(s->require("time")).dtype == DataType::Int64);
    CHECK(std::count_if(s->fields().begin(), s->fields().end(),
                        [](const Field& f) { return f.dtype == DataType::Utf8; }) >= 1);
  }
  CHECK(std::count_if(ships.fields().begin(), ships.fields().end(),
                      [](const Field& f) { return f.dtype == DataType::Utf8; }) == 1);
  for (DatasetKind k : kKinds) {
    CHECK(parse_kind(kind_name(k)) == k);
    CHECK(gen_dataset({k, 0, 9}).nrows() == 0);
    CHECK(gen_dataset({k, 0, 9}).schema() == dataset_schema(k));
  }
  CHECK_FALSE(parse_kind("boats").has_value());
}

TEST_CASE("generators are deterministic") {
  for (DatasetKind k : kKinds) {
    const Table a = gen_dataset({k, 3000, 42});
    CHECK(a == gen_dataset({k, 3000, 42}));
    CHECK_FALSE(a == gen_dataset({k, 3000, 43}));
    CHECK(a.nrows() == 3000);
  }
}

TEST_CASE("generator ID rules") {
  const auto particles = low_bit_histogram(gen_dataset({DatasetKind::Particles, 100000, 42}), 2);
  CHECK(std::count_if(particles.begin(), particles.end(), [](std::size_t c) { return c > 0; }) == 3);
  CHECK(particles[3] == 0);

  const Table planes = gen_dataset({DatasetKind::Planes, 100000, 42});
  for (unsigned b = 1; b <= 4; ++b) {
    const double even = 100000.0 / static_cast<double>(1u << b);
    for (std::size_t c : low_bit_histogram(planes, b)) CHECK(std::abs(static_cast<double>(c) - even) <= 0.05 * even);
  }

  const auto ships = low_bit_histogram(gen_dataset({DatasetKind::Ships, 100000, 42}), 2);
  const double weights[] = {0.4, 0.3, 0.2, 0.1};
  for (std::size_t i = 0; i < 4; ++i) CHECK(static_cast<double>(ships[i]) == doctest::Approx(1e5 * weights[i]).epsilon(0.02));
}

TEST_CASE("generator nulls and strings") {
  for (DatasetKind k : kKinds) {
    const Table t = gen_dataset({k, 50000, 7});
    std::size_t nulls = 0, cells = 0;
    for (std::size_t c = 0; c < t.num_columns(); ++c) {
      const Field& f = t.schema().field(c);
      const Column& col = t.column(c);
      if (f.name == "id" || f.name == "time") {
        CHECK_FALSE(f.nullable);
        CHECK(col.null_count() == 0);
        continue;
      }
      CHECK(f.nullable);
      nulls += col.null_count();
      cells += col.length();
      if (f.dtype != DataType::Utf8) continue;
      for (std::size_t r = 0; r < col.length(); ++r) {
        if (!col.is_valid(r)) continue;
        const auto len = col.utf8_value(r).size();
        REQUIRE(len >= 3);
        REQUIRE(len <= 12);
      }
    }
    CHECK(static_cast<double>(nulls) / static_cast<double>(cells) == doctest::Approx(0.01).epsilon(0.15));
  }
}

TEST_CASE("csv examples") {
  const Schema s({{"id", DataType::Int64, false}, {"x", DataType::Float64, true}, {"s", DataType::Utf8, true}});
  CHECK(from_csv_text("id,x,s\n", s).nrows() == 0);
  CHECK_CODE(from_csv_text("id,x,s\nabc,1.0,z\n", s), ErrorCode::ParseError);
  CHECK_CODE(from_csv_text("id,x,s\n1,1.0x,z\n", s), ErrorCode::ParseError);
  CHECK_CODE(from_csv_text("id,x,s\n1,1.0\n", s), ErrorCode::ParseError);
  CHECK_CODE(from_csv_text("id,x,s\n,1.0,z\n", s), ErrorCode::ParseError);
  CHECK_CODE(from_csv_text("id,y,s\n", s), ErrorCode::HeaderMismatch);
  CHECK_CODE(from_csv_text("", s), ErrorCode::HeaderMismatch);
  CHECK_CODE(read_csv(std::filesystem::path("/nonexistent/file.csv"), s), ErrorCode::FileNotFound);

  try {
    (void)from_csv_text("id,x,s\n1,2,a\n2,oops,b\n", s);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(e.index() == 2u);
    CHECK(std::string(e.what()).find("'x'") != std::string::npos);
  }

  const Table t = from_csv_text("id,x,s\n7,,\"\"\n8,2.5,\n9,-1e3,\"a,\"\"b\"\"\nc\"\n", s);
  REQUIRE(t.nrows() == 3);
  CHECK_FALSE(t.column(1).is_valid(0));
  CHECK(t.column(2).is_valid(0));
  CHECK(t.column(2).utf8_value(0).empty());
  CHECK_FALSE(t.column(2).is_valid(1));
  CHECK(t.column(1).float64_values()[2] == -1000.0);
  CHECK(t.column(2).utf8_value(2) == "a,\"b\"\nc");
}

TEST_CASE("csv round trip") {
  for (DatasetKind k : kKinds) {
    const Table t = gen_dataset({k, 2000, 11});
    CHECK(from_csv_text(to_csv_text(t), t.schema()) == t);
  }
  std::mt19937_64 rng(101);
  for (int i = 0; i < 10; ++i) {
    testing::RandomTableOptions opt;
    opt.nan = false;
    const Table t = testing::random_table(rng, rng() % 300, opt);
    CHECK(from_csv_text(to_csv_text(t), t.schema()) == t);
  }

  const auto path = std::filesystem::temp_directory_path() / "pflow_csv_roundtrip.csv";
  const Table t = gen_dataset({DatasetKind::Ships, 500, 1});
  write_csv(t, path);
  CHECK(read_csv(path, t.schema()) == t);
  std::filesystem::remove(path);
}

TEST_CASE("cap_rows") {
  const Table t = gen_dataset({DatasetKind::Planes, 2000, 5});
  const std::size_t full = wire::serialize(t, CodecId::None).size();
  CHECK(cap_rows(t, full) == t);
  CHECK(cap_rows(t, full * 2) == t);
  CHECK(cap_rows(t, wire::serialize(slice(t, 0, 0), CodecId::None).size()).nrows() == 0);
  CHECK(cap_rows(t, 1).nrows() == 0);

  // Fixed-width rows: the limit for 500 rows yields exactly 500.
  std::vector<std::int64_t> a(1000), b(1000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<std::int64_t>(i);
    b[i] = static_cast<std::int64_t>(i * 3);
  }
  const Table fixed = new_table(Schema({{"a", DataType::Int64, false}, {"b", DataType::Int64, true}}),
                                {Column::int64(a), Column::int64(b)});
  const std::size_t header = wire::serialize(slice(fixed, 0, 0), CodecId::None).size();
  // Per column: validity ceil(500/8)=63 -> 64 bytes, data 500*8 = 4000 bytes.
  const std::size_t limit = header + 2 * (64 + 4000);
  CHECK(limit == wire::serialize(slice(fixed, 0, 500), CodecId::None).size());
  CHECK(cap_rows(fixed, limit).nrows() == 500);
  CHECK(cap_rows(fixed, limit - 1).nrows() == 499);
  CHECK(cap_rows(fixed, limit) == slice(fixed, 0, 500));
}

TEST_CASE("experiments") {
  ExperimentConfig c;
  c.kinds = {DatasetKind::Planes};
  c.rows = 3000;
  c.threads = {1, 2};
  c.bits = {1, 2};
  c.capacity = 500;
  c.batch_rows = 200;
  CHECK_CODE(run_experiment("nope", c), ErrorCode::UnknownExperiment);
  for (const auto& name : experiment_names()) {
    CAPTURE(name);
    const auto r = run_experiment(name, c);
    CHECK(r.experiment == name);
    CHECK_FALSE(r.rows.empty());
    std::ostringstream out;
    r.write_csv(out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "experiment,metric,dataset,codec,param,value,unit,config");
    std::size_t lines = 0;
    while (std::getline(in, line)) {
      ++lines;
      CHECK(line.find("rows=3000") != std::string::npos);
      CHECK(line.find("seed=42") != std::string::npos);
    }
    CHECK(lines == r.rows.size());
  }
}

TEST_CASE("ratios on an empty table are 1") {
  ExperimentConfig c;
  c.kinds = {DatasetKind::Ships};
  c.rows = 0;
  const auto r = run_experiment("ratios", c);
  for (const auto& row : r.rows) {
    if (row.metric == "ratio") CHECK(row.value == 1.0);
  }
  CHECK(r.find("outer_identical") == 1.0);
}

TEST_CASE("uncompressed data unpacks faster than zstd") {
  ExperimentConfig c;
  c.kinds = {DatasetKind::Particles};
  c.rows = 200000;
  c.codecs = {CodecId::None, CodecId::Zstd};
  c.repetitions = 5;
  const auto r = run_experiment("split-breakdown", c);
  CHECK(*r.find("unpack_s", "none") < *r.find("unpack_s", "zstd"));
  CHECK(r.find("partition_s", "none").has_value());
  CHECK(r.find("repack_s", "zstd").has_value());
}

TEST_CASE("planes partitions have equal serialized sizes") {
  ExperimentConfig c;
  c.kinds = {DatasetKind::Planes};
  c.codecs = {CodecId::None, CodecId::Lz4Frame, CodecId::Zstd, CodecId::Deflate};
  c.rows = 100000;
  const auto r = run_experiment("partition-sizes", c);
  for (CodecId codec : c.codecs) {
    for (unsigned b : c.bits) {
      std::vector<double> sizes;
      for (const auto& row : r.rows) {
        if (row.metric == "partition_bytes" && row.codec == codec_name(codec) &&
            row.param.starts_with(std::to_string(b) + "/")) {
          sizes.push_back(row.value);
        }
      }
      REQUIRE(sizes.size() == (1u << b));
      const double mean = std::accumulate(sizes.begin(), sizes.end(), 0.0) / static_cast<double>(sizes.size());
      CAPTURE(codec_name(codec));
      CAPTURE(b);
      for (double s : sizes) CHECK(std::abs(s - mean) <= 0.05 * mean);
    }
  }
}
