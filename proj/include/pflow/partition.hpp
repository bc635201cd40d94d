#pragma once

// Bit-split partitioning: each row goes to one of 2^bits output tables
// chosen by the low bits of its particle ID.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pflow/codec.hpp"
#include "pflow/columnar.hpp"

namespace pflow::partition {

enum class NullPolicy { Reject, RouteToZero };

struct PartitionSpec {
  std::string id_field = "id";
  unsigned bits = 1;  // 1..4
  bool hash_ids = false;
  NullPolicy null_policy = NullPolicy::Reject;
  // ID bits below this position are skipped (used by multi-level routing).
  unsigned bit_offset = 0;

  std::size_t partitions() const noexcept { return std::size_t{1} << bits; }
};

struct PartitionSet {
  PartitionSpec spec;
  std::vector<Table> parts;
  std::vector<std::size_t> counts;
  std::optional<std::vector<std::size_t>> serialized_sizes;
};

// (bit pattern of id, optionally splitmix64-mixed) AND (2^bits - 1).
std::size_t partition_index(std::int64_t id, unsigned bits, bool hash_ids, unsigned bit_offset = 0) noexcept;

// One select pass per partition over a shared index vector.
// Errors: UnknownField, WrongIdType, NullId, InvalidArgument (bad bits).
PartitionSet split(const Table& table, const PartitionSpec& spec);

// Single pass appending each row to its partition's builder. Must agree
// with split() exactly; kept as an independent check.
PartitionSet scatter_oracle(const Table& table, const PartitionSpec& spec);

// max(counts) * k / sum(counts). Throws EmptyInput when all counts are 0.
double skew(const std::vector<std::size_t>& counts);

// Fills serialized_sizes with the envelope size of each part.
void measure_sizes(PartitionSet& set, CodecId codec);

}  // namespace pflow::partition
