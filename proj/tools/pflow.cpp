// pflow: dataset generation, splitting and benchmark harness.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "pflow/partition.hpp"
#include "pflow/wire.hpp"
#include "pflow/workbench.hpp"

namespace fs = std::filesystem;
using namespace pflow;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

CodecId codec_arg(const std::string& s) {
  auto c = parse_codec(s);
  if (!c) throw Error(ErrorCode::InvalidArgument, "unknown codec '" + s + "'");
  return *c;
}

workbench::DatasetKind kind_arg(const std::string& s) {
  auto k = workbench::parse_kind(s);
  if (!k) throw Error(ErrorCode::InvalidArgument, "unknown dataset kind '" + s + "'");
  return *k;
}

template <class T>
std::vector<T> numbers(const std::string& list) {
  std::vector<T> out;
  for (const auto& item : split_list(list)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorCode::InvalidArgument, "not a number: '" + item + "'");
    out.push_back(static_cast<T>(v));
  }
  return out;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileNotFound, "cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void emit(const workbench::ExperimentReport& report, const std::string& csv) {
  if (csv.empty() || csv == "-") {
    report.write_csv(std::cout);
  } else {
    report.write_csv(fs::path(csv));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pflow: partitioned columnar data flow toolkit"};
  app.require_subcommand(1);

  // gen
  std::string kind = "particles";
  std::size_t rows = 100000;
  std::uint64_t seed = 42;
  std::string out_path;
  std::string codec = "none";
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset as a .ptbl envelope");
  gen->add_option("--kind", kind, "particles|planes|ships")->capture_default_str();
  gen->add_option("--rows", rows)->capture_default_str();
  gen->add_option("--seed", seed)->capture_default_str();
  gen->add_option("--codec", codec, "none|lz4f|zstd|deflate")->capture_default_str();
  gen->add_option("--out", out_path)->required();

  // split
  std::string in_path;
  unsigned bits = 2;
  bool hash = false;
  std::string out_dir;
  auto* split = app.add_subcommand("split", "Partition an envelope on low ID bits");
  split->add_option("--in", in_path)->required();
  split->add_option("--bits", bits)->required();
  split->add_flag("--hash", hash, "mix IDs before taking bits");
  split->add_option("--codec", codec, "none|lz4f|zstd|deflate")->capture_default_str();
  split->add_option("--out-dir", out_dir)->required();

  // bench
  std::string experiment;
  std::string kinds = "particles";
  std::string codecs = "none,lz4f,zstd";
  std::string threads = "1,2,4,8";
  std::string bits_list = "1,2,3,4";
  std::size_t reps = 3;
  std::size_t chunk_size = 65536;
  std::string csv;
  auto* bench = app.add_subcommand("bench", "Run a benchmark experiment and write a CSV report");
  bench->add_option("experiment", experiment)->required()->check(CLI::IsMember(workbench::experiment_names()));
  bench->add_option("--kind", kinds, "comma-separated dataset kinds")->capture_default_str();
  bench->add_option("--rows", rows)->capture_default_str();
  bench->add_option("--seed", seed)->capture_default_str();
  bench->add_option("--codecs", codecs)->capture_default_str();
  bench->add_option("--threads", threads)->capture_default_str();
  bench->add_option("--bits", bits_list)->capture_default_str();
  bench->add_option("--reps", reps)->capture_default_str();
  bench->add_option("--chunk-size", chunk_size)->capture_default_str();
  bench->add_option("--csv", csv, "output path (stdout if omitted)");

  // flowsim
  unsigned depth = 2;
  std::size_t capacity = 4096;
  std::size_t batch = 1000;
  std::string flow_codec = "zstd";
  auto* flowsim = app.add_subcommand("flowsim", "Route rows through a processing-element tree");
  flowsim->add_option("--kind", kinds)->capture_default_str();
  flowsim->add_option("--rows", rows)->capture_default_str();
  flowsim->add_option("--seed", seed)->capture_default_str();
  flowsim->add_option("--bits", bits)->capture_default_str();
  flowsim->add_option("--depth", depth)->capture_default_str();
  flowsim->add_option("--capacity", capacity)->capture_default_str();
  flowsim->add_option("--batch", batch)->capture_default_str();
  flowsim->add_option("--codec", flow_codec)->capture_default_str();
  flowsim->add_option("--reps", reps)->capture_default_str();
  flowsim->add_option("--csv", csv, "output path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const Table t = workbench::gen_dataset({kind_arg(kind), rows, seed});
      const Bytes env = wire::serialize(t, codec_arg(codec));
      write_file(out_path, env);
      std::cout << "wrote " << t.nrows() << " rows, " << env.size() << " bytes to " << out_path << '\n';
    } else if (*split) {
      const Table t = wire::deserialize(read_file(in_path));
      partition::PartitionSpec spec;
      spec.bits = bits;
      spec.hash_ids = hash;
      const auto parts = partition::split(t, spec);
      const CodecId c = codec_arg(codec);
      fs::create_directories(out_dir);
      for (std::size_t p = 0; p < parts.parts.size(); ++p) {
        const fs::path path = fs::path(out_dir) / ("part-" + std::to_string(p) + ".ptbl");
        const Bytes env = wire::serialize(parts.parts[p], c);
        write_file(path, env);
        std::cout << path.string() << ' ' << parts.counts[p] << " rows " << env.size() << " bytes\n";
      }
    } else if (*bench || *flowsim) {
      workbench::ExperimentConfig cfg;
      cfg.kinds.clear();
      for (const auto& k : split_list(kinds)) cfg.kinds.push_back(kind_arg(k));
      cfg.rows = rows;
      cfg.seed = seed;
      cfg.repetitions = reps;
      if (*bench) {
        cfg.codecs.clear();
        for (const auto& c : split_list(codecs)) cfg.codecs.push_back(codec_arg(c));
        cfg.threads = numbers<std::size_t>(threads);
        cfg.bits = numbers<unsigned>(bits_list);
        cfg.chunk_size = chunk_size;
      } else {
        experiment = "flowsim";
        cfg.bits = {bits};
        cfg.depth = depth;
        cfg.capacity = capacity;
        cfg.batch_rows = batch;
        cfg.flow_codec = codec_arg(flow_codec);
      }
      emit(workbench::run_experiment(experiment, cfg), csv);
    }
  } catch (const std::exception& e) {
    std::cerr << "pflow: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
