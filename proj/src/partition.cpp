#include "pflow/partition.hpp"

#include <algorithm>

#include "pflow/kernels.hpp"
#include "pflow/wire.hpp"

namespace pflow::partition {

namespace {

const Column& id_column(const Table& table, const PartitionSpec& spec) {
  if (spec.bits < 1 || spec.bits > 4) {
    throw Error(ErrorCode::InvalidArgument, "bits must be in [1, 4], got " + std::to_string(spec.bits));
  }
  if (spec.bit_offset + spec.bits > 64) throw Error(ErrorCode::InvalidArgument, "bit range exceeds 64 bits");
  const Column& ids = table.column(table.schema().require(spec.id_field));
  if (ids.dtype() != DataType::Int64) {
    throw Error(ErrorCode::WrongIdType, "id field '" + spec.id_field + "' is " + std::string(dtype_name(ids.dtype())));
  }
  if (spec.null_policy == NullPolicy::Reject && ids.null_count() != 0) {
    throw Error(ErrorCode::NullId, "id field '" + spec.id_field + "' contains " + std::to_string(ids.null_count()) +
                                       " nulls");
  }
  return ids;
}

PartitionSet finish(const PartitionSpec& spec, std::vector<Table> parts) {
  PartitionSet set;
  set.spec = spec;
  set.counts.reserve(parts.size());
  for (const Table& t : parts) set.counts.push_back(t.nrows());
  set.parts = std::move(parts);
  return set;
}

}  // namespace

std::size_t partition_index(std::int64_t id, unsigned bits, bool hash_ids, unsigned bit_offset) noexcept {
  std::uint64_t v = static_cast<std::uint64_t>(id);
  if (hash_ids) v = kernels::splitmix64_mix(v);
  return static_cast<std::size_t>((v >> bit_offset) & ((std::uint64_t{1} << bits) - 1));
}

PartitionSet split(const Table& table, const PartitionSpec& spec) {
  const Column& ids = id_column(table, spec);
  const auto& k = kernels::active();
  const std::size_t n = table.nrows();

  std::vector<std::uint8_t> index(n);
  k.partition_indices(ids.int64_values(), spec.bit_offset, spec.bits, spec.hash_ids, index);
  if (ids.null_count() != 0) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!ids.is_valid(i)) index[i] = 0;
    }
  }

  std::vector<Table> parts;
  parts.reserve(spec.partitions());
  Bitmap mask(n);
  for (std::size_t j = 0; j < spec.partitions(); ++j) {
    k.match_mask(index, static_cast<std::uint8_t>(j), mask.mutable_bytes());
    parts.push_back(select(table, mask));
  }
  return finish(spec, std::move(parts));
}

PartitionSet scatter_oracle(const Table& table, const PartitionSpec& spec) {
  const Column& ids = id_column(table, spec);
  std::vector<TableBuilder> builders;
  builders.reserve(spec.partitions());
  for (std::size_t j = 0; j < spec.partitions(); ++j) builders.emplace_back(table.schema());

  const auto values = ids.int64_values();
  for (std::size_t row = 0; row < table.nrows(); ++row) {
    const std::size_t j =
        ids.is_valid(row) ? partition_index(values[row], spec.bits, spec.hash_ids, spec.bit_offset) : 0;
    builders[j].append_row_from(table, row);
  }

  std::vector<Table> parts;
  parts.reserve(builders.size());
  for (auto& b : builders) parts.push_back(b.finish());
  return finish(spec, std::move(parts));
}

double skew(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  std::size_t max = 0;
  for (std::size_t c : counts) {
    total += c;
    max = std::max(max, c);
  }
  if (total == 0) throw Error(ErrorCode::EmptyInput, "skew of all-zero counts");
  return static_cast<double>(max) * static_cast<double>(counts.size()) / static_cast<double>(total);
}

void measure_sizes(PartitionSet& set, CodecId codec) {
  std::vector<std::size_t> sizes;
  sizes.reserve(set.parts.size());
  for (const Table& t : set.parts) sizes.push_back(wire::serialize(t, codec).size());
  set.serialized_sizes = std::move(sizes);
}

}  // namespace pflow::partition
