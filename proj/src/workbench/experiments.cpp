#include <algorithm>
#include <chrono>
#include <fstream>
#include <ostream>
#include <sstream>

#include "pflow/chunkpipe.hpp"
#include "pflow/flowsim.hpp"
#include "pflow/partition.hpp"
#include "pflow/wire.hpp"
#include "pflow/workbench.hpp"

namespace pflow::workbench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::size_t reps_of(const ExperimentConfig& c) { return std::max<std::size_t>(c.repetitions, 3); }

// Median wall time of fn over the configured repetitions.
template <class Fn>
double timed(const ExperimentConfig& c, Fn&& fn) {
  std::vector<double> samples;
  for (std::size_t r = 0; r < reps_of(c); ++r) {
    const auto t0 = Clock::now();
    fn();
    samples.push_back(seconds_since(t0));
  }
  return median(samples);
}

double gbps(std::size_t bytes, double seconds) {
  return static_cast<double>(bytes) * 8.0 / std::max(seconds, 1e-9) / 1e9;
}

template <class T>
std::string join(const std::vector<T>& items, auto&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ' ';
    s += fmt(items[i]);
  }
  return s;
}

std::map<std::string, std::string> echo(const ExperimentConfig& c) {
  auto num = [](auto v) { return std::to_string(v); };
  return {
      {"kinds", join(c.kinds, [](DatasetKind k) { return std::string(kind_name(k)); })},
      {"rows", num(c.rows)},
      {"seed", num(c.seed)},
      {"codecs", join(c.codecs, [](CodecId id) { return std::string(codec_name(id)); })},
      {"threads", join(c.threads, num)},
      {"bits", join(c.bits, num)},
      {"repetitions", num(reps_of(c))},
      {"chunk_size", num(c.chunk_size)},
      {"window", num(c.window)},
      {"depth", num(c.depth)},
      {"capacity", num(c.capacity)},
      {"flow_codec", std::string(codec_name(c.flow_codec))},
      {"batch_rows", num(c.batch_rows)},
  };
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

Table dataset(const ExperimentConfig& c, DatasetKind kind) { return gen_dataset({kind, c.rows, c.seed}); }

using Rows = std::vector<ReportRow>;

void add(Rows& out, std::string metric, DatasetKind kind, CodecId codec, std::string param, double value,
         std::string unit) {
  out.push_back({std::move(metric), std::string(kind_name(kind)), std::string(codec_name(codec)), std::move(param), value,
                 std::move(unit)});
}

partition::PartitionSpec spec_for(unsigned bits) {
  partition::PartitionSpec spec;
  spec.bits = bits;
  return spec;
}

std::vector<Bytes> repack(const partition::PartitionSet& parts, CodecId codec) {
  std::vector<Bytes> out;
  out.reserve(parts.parts.size());
  for (const Table& t : parts.parts) out.push_back(wire::serialize(t, codec, wire::Parallelism::fixed(1)));
  return out;
}

// Unpack an envelope, split it on the low ID bits, repack every partition.
void split_overhead(const ExperimentConfig& c, Rows& out) {
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    for (CodecId codec : c.codecs) {
      const Bytes envelope = wire::serialize(table, codec, wire::Parallelism::fixed(1));
      const double base = timed(c, [&] { (void)wire::deserialize(envelope, wire::Parallelism::fixed(1)); });
      add(out, "unsplit_unpack_s", kind, codec, "0", base, "s");
      for (unsigned bits : c.bits) {
        const double total = timed(c, [&] {
          const Table t = wire::deserialize(envelope, wire::Parallelism::fixed(1));
          (void)repack(partition::split(t, spec_for(bits)), codec);
        });
        add(out, "split_total_s", kind, codec, std::to_string(bits), total, "s");
      }
    }
  }
}

void split_breakdown(const ExperimentConfig& c, Rows& out) {
  const auto spec = spec_for(2);
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    for (CodecId codec : c.codecs) {
      const Bytes envelope = wire::serialize(table, codec, wire::Parallelism::fixed(1));
      std::vector<double> unpack, part, pack;
      for (std::size_t r = 0; r < reps_of(c); ++r) {
        auto t0 = Clock::now();
        const Table t = wire::deserialize(envelope, wire::Parallelism::fixed(1));
        unpack.push_back(seconds_since(t0));
        t0 = Clock::now();
        const auto parts = partition::split(t, spec);
        part.push_back(seconds_since(t0));
        t0 = Clock::now();
        (void)repack(parts, codec);
        pack.push_back(seconds_since(t0));
      }
      add(out, "unpack_s", kind, codec, "2", median(unpack), "s");
      add(out, "partition_s", kind, codec, "2", median(part), "s");
      add(out, "repack_s", kind, codec, "2", median(pack), "s");
    }
  }
}

void partition_sizes(const ExperimentConfig& c, Rows& out) {
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    for (CodecId codec : c.codecs) {
      add(out, "unsplit_bytes", kind, codec, "0", static_cast<double>(wire::serialize(table, codec).size()), "bytes");
      for (unsigned bits : c.bits) {
        auto parts = partition::split(table, spec_for(bits));
        partition::measure_sizes(parts, codec);
        const auto& sizes = *parts.serialized_sizes;
        std::size_t total = 0;
        for (std::size_t p = 0; p < sizes.size(); ++p) {
          total += sizes[p];
          const std::string param = std::to_string(bits) + "/" + std::to_string(p);
          add(out, "partition_bytes", kind, codec, param, static_cast<double>(sizes[p]), "bytes");
          add(out, "partition_rows", kind, codec, param, static_cast<double>(parts.counts[p]), "rows");
        }
        add(out, "aggregate_bytes", kind, codec, std::to_string(bits), static_cast<double>(total), "bytes");
        if (table.nrows() > 0) {
          add(out, "skew", kind, codec, std::to_string(bits), partition::skew(parts.counts), "ratio");
        }
      }
    }
  }
}

void serde_single(const ExperimentConfig& c, Rows& out) {
  const auto one = wire::Parallelism::fixed(1);
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    for (CodecId codec : c.codecs) {
      Bytes envelope;
      const double ser = timed(c, [&] { envelope = wire::serialize(table, codec, one); });
      const double de = timed(c, [&] { (void)wire::deserialize(envelope, one); });
      add(out, "serialize_s", kind, codec, "1", ser, "s");
      add(out, "deserialize_s", kind, codec, "1", de, "s");
      add(out, "envelope_bytes", kind, codec, "1", static_cast<double>(envelope.size()), "bytes");
    }
  }
}

void serde_threads(const ExperimentConfig& c, Rows& out) {
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    const std::size_t raw = wire::uncompressed_envelope_size(table, table.nrows());
    for (CodecId codec : c.codecs) {
      for (std::size_t threads : c.threads) {
        const auto par = wire::Parallelism::fixed(threads);
        Bytes envelope;
        const double ser = timed(c, [&] { envelope = wire::serialize(table, codec, par); });
        const double de = timed(c, [&] { (void)wire::deserialize(envelope, par); });
        add(out, "serialize_gbps", kind, codec, std::to_string(threads), gbps(raw, ser), "Gbps");
        add(out, "deserialize_gbps", kind, codec, std::to_string(threads), gbps(raw, de), "Gbps");
      }
    }
  }
}

// Outer compression of the uncompressed envelope through the chunk pipeline.
void chunk_throughput(const ExperimentConfig& c, Rows& out) {
  for (DatasetKind kind : c.kinds) {
    const Bytes envelope = wire::serialize(dataset(c, kind), CodecId::None);
    for (CodecId codec : c.codecs) {
      if (codec == CodecId::None) continue;
      for (std::size_t workers : c.threads) {
        chunkpipe::PipelineConfig pc{codec, c.chunk_size, std::max<std::size_t>(workers, 1), c.window};
        pc.validate();
        Bytes container;
        const double comp = timed(c, [&] { container = chunkpipe::compress_chunked(envelope, pc); });
        const double decomp = timed(c, [&] { (void)chunkpipe::decompress_chunked(container, pc.workers); });
        add(out, "compress_gbps", kind, codec, std::to_string(workers), gbps(envelope.size(), comp), "Gbps");
        add(out, "decompress_gbps", kind, codec, std::to_string(workers), gbps(envelope.size(), decomp), "Gbps");
      }
    }
  }
}

void ratios(const ExperimentConfig& c, Rows& out) {
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    const Bytes plain = wire::serialize(table, CodecId::None);
    const bool empty = table.nrows() == 0;
    auto ratio = [&](std::size_t compressed) {
      return empty ? 1.0 : static_cast<double>(compressed) / static_cast<double>(plain.size());
    };
    add(out, "ratio", kind, CodecId::Lz4Frame, "inner", ratio(wire::serialize(table, CodecId::Lz4Frame).size()),
        "ratio");
    add(out, "ratio", kind, CodecId::Zstd, "inner", ratio(wire::serialize(table, CodecId::Zstd).size()), "ratio");

    chunkpipe::PipelineConfig pc{CodecId::Deflate, c.chunk_size, 1, c.window};
    const Bytes outer1 = chunkpipe::compress_chunked(plain, pc);
    pc.workers = 2;
    const Bytes outer2 = chunkpipe::compress_chunked(plain, pc);
    if (!(wire::deserialize(chunkpipe::decompress_chunked(outer1)) == table)) {
      throw Error(ErrorCode::LayoutMismatch, "outer compression did not round-trip");
    }
    add(out, "ratio", kind, CodecId::Deflate, "outer-1", ratio(outer1.size()), "ratio");
    add(out, "ratio", kind, CodecId::Deflate, "outer-2", ratio(outer2.size()), "ratio");
    add(out, "outer_identical", kind, CodecId::Deflate, "1-2", outer1 == outer2 ? 1.0 : 0.0, "bool");
  }
}

void flow(const ExperimentConfig& c, Rows& out) {
  for (DatasetKind kind : c.kinds) {
    const Table table = dataset(c, kind);
    for (unsigned bits : c.bits) {
      flowsim::TreeConfig tc;
      tc.bits_per_level = bits;
      tc.depth = c.depth;
      tc.capacity = c.capacity;
      tc.codec = c.flow_codec;
      tc.validate();
      const std::size_t batch = std::max<std::size_t>(c.batch_rows, 1);

      flowsim::FlowMetrics m;
      std::size_t stored = 0;
      const double wall = timed(c, [&] {
        flowsim::Tree tree(tc);
        for (std::size_t at = 0; at < table.nrows(); at += batch) {
          tree.ingest(slice(table, at, std::min(batch, table.nrows() - at)));
        }
        tree.drain();
        m = tree.metrics();
        stored = tree.stored_rows();
      });
      if (stored != table.nrows()) throw Error(ErrorCode::LayoutMismatch, "flowsim lost rows");

      const std::string b = std::to_string(bits);
      add(out, "wall_s", kind, tc.codec, b, wall, "s");
      add(out, "rows_per_s", kind, tc.codec, b, static_cast<double>(table.nrows()) / std::max(wall, 1e-9), "rows/s");
      for (std::size_t level = 0; level < m.bytes_forwarded.size(); ++level) {
        const std::string p = b + "/L" + std::to_string(level);
        add(out, "bytes_forwarded", kind, tc.codec, p, static_cast<double>(m.bytes_forwarded[level]), "bytes");
        add(out, "messages_forwarded", kind, tc.codec, p, static_cast<double>(m.messages_forwarded[level]), "count");
      }
      add(out, "compactions", kind, tc.codec, b, static_cast<double>(m.compactions), "count");
      add(out, "leaf_merges", kind, tc.codec, b, static_cast<double>(m.leaf_merges), "count");
      add(out, "stored_rows", kind, tc.codec, b, static_cast<double>(stored), "rows");
      if (stored > 0) {
        std::vector<std::size_t> leaf(m.leaf_rows.begin(), m.leaf_rows.end());
        add(out, "leaf_skew", kind, tc.codec, b, partition::skew(leaf), "ratio");
      }
    }
  }
}

using Runner = void (*)(const ExperimentConfig&, Rows&);

const std::map<std::string, Runner, std::less<>>& registry() {
  static const std::map<std::string, Runner, std::less<>> r = {
      {"split-overhead", split_overhead}, {"split-breakdown", split_breakdown}, {"partition-sizes", partition_sizes},
      {"serde-single", serde_single},     {"serde-threads", serde_threads},     {"chunk-throughput", chunk_throughput},
      {"ratios", ratios},                 {"flowsim", flow},
  };
  return r;
}

}  // namespace

void ExperimentReport::write_csv(std::ostream& out) const {
  std::string cfg;
  for (const auto& [k, v] : config) {
    if (!cfg.empty()) cfg += ';';
    cfg += k + '=' + v;
  }
  cfg = csv_field(cfg);
  out << "experiment,metric,dataset,codec,param,value,unit,config\n";
  for (const ReportRow& r : rows) {
    std::ostringstream value;
    value.imbue(std::locale::classic());
    value.precision(17);
    value << r.value;
    out << csv_field(experiment) << ',' << csv_field(r.metric) << ',' << csv_field(r.dataset) << ','
        << csv_field(r.codec) << ',' << csv_field(r.param) << ',' << value.str() << ',' << csv_field(r.unit) << ','
        << cfg << '\n';
  }
}

void ExperimentReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  write_csv(out);
  if (!out) throw Error(ErrorCode::IoError, "write to " + path.string() + " failed");
}

std::optional<double> ExperimentReport::find(std::string_view metric, std::string_view codec,
                                             std::string_view param) const {
  for (const ReportRow& r : rows) {
    if (r.metric != metric) continue;
    if (!codec.empty() && r.codec != codec) continue;
    if (!param.empty() && r.param != param) continue;
    return r.value;
  }
  return std::nullopt;
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"split-overhead", "split-breakdown", "partition-sizes",
                                                 "serde-single",   "serde-threads",   "chunk-throughput",
                                                 "ratios",         "flowsim"};
  return names;
}

ExperimentReport run_experiment(std::string_view name, const ExperimentConfig& config) {
  const auto& r = registry();
  const auto it = r.find(name);
  if (it == r.end()) throw Error(ErrorCode::UnknownExperiment, "unknown experiment '" + std::string(name) + "'");
  if (config.kinds.empty()) throw Error(ErrorCode::InvalidArgument, "no dataset kinds selected");
  for (unsigned b : config.bits) {
    if (b < 1 || b > 4) throw Error(ErrorCode::InvalidArgument, "bits must be in [1, 4]");
  }
  ExperimentReport report;
  report.experiment = std::string(name);
  report.config = echo(config);
  it->second(config, report.rows);
  return report;
}

}  // namespace pflow::workbench
