#pragma once

// Synthetic reference datasets, CSV ingestion and the benchmark experiments
// behind `pflow bench`.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pflow/codec.hpp"
#include "pflow/columnar.hpp"

namespace pflow::workbench {

// Particles: 10 numeric fields (particle hits).
// Planes:    16 fields, flight-tracking style, two Utf8 columns.
// Ships:     17 fields, vessel-tracking style, one Utf8 column (35 buffers).
enum class DatasetKind { Particles, Planes, Ships };

std::string_view kind_name(DatasetKind kind) noexcept;
std::optional<DatasetKind> parse_kind(std::string_view name) noexcept;

Schema dataset_schema(DatasetKind kind);

// ID rules per kind: Particles IDs only ever have low two bits in {0,1,2};
// Planes IDs are balanced in their low four bits; Ships IDs have low two
// bits in classes 0..3 with weights 40/30/20/10.
struct GenProfile {
  DatasetKind kind = DatasetKind::Particles;
  std::size_t rows = 0;
  std::uint64_t seed = 42;
};

// Same profile, bit-identical table. Floats are built as integer multiples
// of powers of two, so no platform rounding enters.
Table gen_dataset(const GenProfile& profile);

// CSV: header row of field names, empty cell = null, Utf8 cells quoted when
// they contain a comma, quote or newline (an empty string is written as "").
void write_csv(const Table& table, std::ostream& out);
void write_csv(const Table& table, const std::filesystem::path& path);

// Errors: FileNotFound, HeaderMismatch, ParseError (index = 1-based data row).
Table read_csv(const std::filesystem::path& path, const Schema& schema);
Table read_csv(std::istream& in, const Schema& schema);

// Longest prefix whose uncompressed envelope fits in byte_limit (binary
// search over the row count); 0 rows when even one row does not fit.
Table cap_rows(const Table& table, std::size_t byte_limit);

// One CSV report row.
struct ReportRow {
  std::string metric;
  std::string dataset;
  std::string codec;
  std::string param;  // threads, workers, bits or partition, depending on the metric
  double value = 0;
  std::string unit;
};

struct ExperimentReport {
  std::string experiment;
  std::map<std::string, std::string> config;  // echoed into every row
  std::vector<ReportRow> rows;

  // Header: experiment,metric,dataset,codec,param,value,unit,config
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  // First row with matching metric/dataset/codec/param (empty = any).
  std::optional<double> find(std::string_view metric, std::string_view codec = {}, std::string_view param = {}) const;
};

struct ExperimentConfig {
  std::vector<DatasetKind> kinds = {DatasetKind::Particles};
  std::size_t rows = 100000;
  std::uint64_t seed = 42;
  std::vector<CodecId> codecs = {CodecId::None, CodecId::Lz4Frame, CodecId::Zstd};
  std::vector<std::size_t> threads = {1, 2, 4, 8};
  std::vector<unsigned> bits = {1, 2, 3, 4};
  std::size_t repetitions = 3;
  // chunk-throughput
  std::size_t chunk_size = 65536;
  std::size_t window = 160ull * 1024 * 1024;
  // flowsim
  unsigned depth = 2;
  std::size_t capacity = 4096;
  CodecId flow_codec = CodecId::Zstd;
  std::size_t batch_rows = 1000;
};

const std::vector<std::string>& experiment_names();

// Throws UnknownExperiment, plus errors from the modules it drives.
ExperimentReport run_experiment(std::string_view name, const ExperimentConfig& config);

}  // namespace pflow::workbench
