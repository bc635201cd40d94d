#include "pflow/flowsim.hpp"

#include <algorithm>
#include <string>

#include "pflow/parallel.hpp"
#include "pflow/partition.hpp"
#include "pflow/wire.hpp"

namespace pflow::flowsim {

namespace {

const std::vector<std::string> kSortKeys = {"id", "time"};

void require_int64(const Schema& schema, const char* name) {
  const auto i = schema.index_of(name);
  if (!i || schema.field(*i).dtype != DataType::Int64) {
    throw Error(ErrorCode::SchemaMismatch, std::string("batches need an int64 field '") + name + "'");
  }
}

}  // namespace

void TreeConfig::validate() const {
  if (bits_per_level < 1 || bits_per_level > 4) throw Error(ErrorCode::InvalidArgument, "bits_per_level must be in [1, 4]");
  if (depth < 1) throw Error(ErrorCode::InvalidArgument, "depth must be at least 1");
  if (bits_per_level * depth > 20) throw Error(ErrorCode::InvalidArgument, "tree too large (more than 2^20 leaves)");
  if (capacity == 0) throw Error(ErrorCode::InvalidArgument, "capacity must be positive");
}

// ---------------------------------------------------------------------------
// ProcessingElement

ProcessingElement::ProcessingElement(unsigned level, std::size_t index, const TreeConfig& config)
    : level_(level),
      index_(index),
      depth_(config.depth),
      bits_(config.bits_per_level),
      capacity_(config.capacity),
      codec_(config.codec) {}

bool ProcessingElement::buffer(const Table& batch) {
  if (is_leaf()) throw Error(ErrorCode::InvalidArgument, "leaves do not buffer; use absorb");
  if (batch.nrows() > 0) {
    buffered_.push_back(batch);
    buffered_rows_ += batch.nrows();
  }
  return buffered_rows_ >= capacity_;
}

std::vector<Message> ProcessingElement::compact() {
  if (is_leaf()) throw Error(ErrorCode::InvalidArgument, "cannot compact a leaf");
  std::vector<Message> out;
  if (buffered_.empty()) return out;

  const Table all = concat(buffered_);
  buffered_.clear();
  buffered_rows_ = 0;

  partition::PartitionSpec spec;
  spec.id_field = "id";
  spec.bits = bits_;
  spec.bit_offset = bits_ * level_;
  const partition::PartitionSet parts = partition::split(all, spec);
  for (std::size_t j = 0; j < parts.parts.size(); ++j) {
    if (parts.counts[j] == 0) continue;
    out.push_back({j, wire::serialize(parts.parts[j], codec_, wire::Parallelism::fixed(1))});
  }
  return out;
}

void ProcessingElement::check_prefix(const Table& batch) const {
  const unsigned prefix_bits = bits_ * level_;
  if (prefix_bits == 0) return;
  const std::uint64_t mask = (std::uint64_t{1} << prefix_bits) - 1;
  const auto ids = batch.column("id").int64_values();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if ((static_cast<std::uint64_t>(ids[r]) & mask) != index_) {
      throw Error(ErrorCode::RoutingViolation, "id " + std::to_string(ids[r]) + " does not belong to element (" +
                                                   std::to_string(level_) + ", " + std::to_string(index_) + ")",
                  r);
    }
  }
}

void ProcessingElement::absorb(const Table& batch) {
  if (!is_leaf()) throw Error(ErrorCode::InvalidArgument, "only leaves absorb");
  if (batch.nrows() == 0) return;
  check_prefix(batch);
  runs_.push_back(sort_by(batch, kSortKeys));
  if (runs_.size() > kMaxRunsPerLeaf) {
    const Table merged = sort_by(concat(runs_), kSortKeys);
    runs_.clear();
    runs_.push_back(merged);
    ++merges_;
  }
}

std::size_t ProcessingElement::stored_rows() const noexcept {
  std::size_t n = 0;
  for (const Table& t : runs_) n += t.nrows();
  return n;
}

// ---------------------------------------------------------------------------
// Tree

Tree::Tree(TreeConfig config) : config_(config) {
  config_.validate();
  levels_.resize(config_.depth + 1);
  inboxes_.resize(config_.depth + 1);
  for (unsigned level = 0; level <= config_.depth; ++level) {
    const std::size_t width = std::size_t{1} << (config_.bits_per_level * level);
    levels_[level].reserve(width);
    for (std::size_t i = 0; i < width; ++i) levels_[level].emplace_back(level, i, config_);
    inboxes_[level].resize(width);
  }
  bytes_forwarded_.assign(config_.depth, 0);
  messages_forwarded_.assign(config_.depth, 0);
}

void Tree::ingest(const Table& batch) {
  if (schema_) {
    if (!(batch.schema() == *schema_)) throw Error(ErrorCode::SchemaMismatch, "batch schema differs from earlier batches");
  } else {
    require_int64(batch.schema(), "id");
    require_int64(batch.schema(), "time");
    schema_ = batch.schema();
  }
  if (batch.nrows() == 0) return;
  rows_ingested_ += batch.nrows();
  ProcessingElement& root = levels_[0][0];
  if (root.buffer(batch)) {
    ++compactions_;
    deliver(0, 0, root.compact());
    pump();
  }
}

void Tree::drain() {
  for (unsigned level = 0; level < config_.depth; ++level) {
    pump();
    for (std::size_t i = 0; i < levels_[level].size(); ++i) {
      ProcessingElement& e = levels_[level][i];
      if (e.buffered_rows() == 0) continue;
      ++compactions_;
      deliver(level, i, e.compact());
    }
  }
  pump();
}

void Tree::deliver(unsigned level, std::size_t sender, std::vector<Message> messages) {
  const std::size_t stride = std::size_t{1} << (config_.bits_per_level * level);
  for (Message& m : messages) {
    bytes_forwarded_[level] += m.envelope.size();
    ++messages_forwarded_[level];
    inboxes_[level + 1][sender + m.child * stride].push_back(std::move(m.envelope));
  }
}

std::uint64_t Tree::receive(unsigned level, std::size_t index, std::vector<Message>& out) {
  ProcessingElement& e = levels_[level][index];
  auto& inbox = inboxes_[level][index];
  std::uint64_t compactions = 0;
  while (!inbox.empty()) {
    const Table batch = wire::deserialize(inbox.front(), wire::Parallelism::fixed(1));
    inbox.pop_front();
    if (e.is_leaf()) {
      e.absorb(batch);
      continue;
    }
    e.check_prefix(batch);
    if (e.buffer(batch)) {
      ++compactions;
      auto msgs = e.compact();
      for (auto& m : msgs) out.push_back(std::move(m));
    }
  }
  return compactions;
}

void Tree::pump() {
  for (unsigned level = 1; level <= config_.depth; ++level) {
    const std::size_t width = levels_[level].size();
    std::vector<std::vector<Message>> outgoing(width);
    std::vector<std::uint64_t> compacted(width, 0);
    auto step = [&](std::size_t i) { compacted[i] = receive(level, i, outgoing[i]); };
    if (config_.parallel) {
      parallel_for(width, hardware_workers(), step);
    } else {
      for (std::size_t i = 0; i < width; ++i) step(i);
    }
    for (std::size_t i = 0; i < width; ++i) {
      compactions_ += compacted[i];
      if (level < config_.depth) deliver(level, i, std::move(outgoing[i]));
    }
  }
}

std::size_t Tree::leaf_of(std::int64_t id) const noexcept {
  const unsigned bits = config_.bits_per_level * config_.depth;
  return static_cast<std::size_t>(static_cast<std::uint64_t>(id) & ((std::uint64_t{1} << bits) - 1));
}

Table Tree::query_track(std::int64_t id, std::int64_t t0, std::int64_t t1) const {
  const Schema schema = schema_ ? *schema_
                                : Schema({{"id", DataType::Int64, false}, {"time", DataType::Int64, false}});
  if (!schema_ || t1 < t0) return empty_table(schema);

  const ProcessingElement& leaf = levels_[config_.depth][leaf_of(id)];
  std::vector<Table> pieces;
  for (const Table& run : leaf.runs()) {
    const auto ids = run.column("id").int64_values();
    const auto times = run.column("time").int64_values();
    // Runs are sorted by (id, time): binary search for the first row >= (id, t0).
    std::size_t lo = 0;
    std::size_t len = run.nrows();
    while (len > 0) {
      const std::size_t half = len / 2;
      const std::size_t mid = lo + half;
      if (std::pair(ids[mid], times[mid]) < std::pair(id, t0)) {
        lo = mid + 1;
        len -= half + 1;
      } else {
        len = half;
      }
    }
    std::size_t hi = lo;
    while (hi < run.nrows() && ids[hi] == id && times[hi] <= t1) ++hi;
    std::vector<std::size_t> rows;
    for (std::size_t r = lo; r < hi; ++r) rows.push_back(r);
    if (!rows.empty()) pieces.push_back(take(run, rows));
  }
  if (pieces.empty()) return empty_table(schema);
  const std::vector<std::string> by_time = {"time"};
  return sort_by(concat(pieces), by_time);
}

const ProcessingElement& Tree::element(unsigned level, std::size_t index) const {
  if (level > config_.depth || index >= levels_[level].size()) {
    throw Error(ErrorCode::InvalidArgument, "no element (" + std::to_string(level) + ", " + std::to_string(index) + ")");
  }
  return levels_[level][index];
}

FlowMetrics Tree::metrics() const {
  FlowMetrics m;
  m.bytes_forwarded = bytes_forwarded_;
  m.messages_forwarded = messages_forwarded_;
  m.compactions = compactions_;
  m.rows_ingested = rows_ingested_;
  for (const ProcessingElement& leaf : levels_[config_.depth]) {
    m.leaf_rows.push_back(leaf.stored_rows());
    m.leaf_merges += leaf.merges();
  }
  return m;
}

std::size_t Tree::stored_rows() const noexcept {
  std::size_t n = 0;
  for (const ProcessingElement& leaf : levels_[config_.depth]) n += leaf.stored_rows();
  return n;
}

std::size_t Tree::buffered_rows() const noexcept {
  std::size_t n = 0;
  for (unsigned level = 0; level < config_.depth; ++level) {
    for (const ProcessingElement& e : levels_[level]) n += e.buffered_rows();
  }
  return n;
}

}  // namespace pflow::flowsim
