#pragma once

// A tree of processing elements that turns spatially batched particle rows
// into per-particle, time-ordered runs. Interior elements buffer rows until
// they reach capacity, then split them on the next group of ID bits and
// forward each partition to a child as a serialized envelope. Leaves keep
// sorted runs that can be searched by (id, time).

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "pflow/bytes.hpp"
#include "pflow/codec.hpp"
#include "pflow/columnar.hpp"

namespace pflow::flowsim {

inline constexpr std::size_t kMaxRunsPerLeaf = 4;

struct TreeConfig {
  unsigned bits_per_level = 1;
  unsigned depth = 1;
  std::size_t capacity = 4096;  // rows
  CodecId codec = CodecId::Zstd;
  // Process all elements of a level concurrently; results are identical.
  bool parallel = false;

  // Throws InvalidArgument.
  void validate() const;
  std::size_t fanout() const noexcept { return std::size_t{1} << bits_per_level; }
  std::size_t leaf_count() const noexcept { return std::size_t{1} << (bits_per_level * depth); }
};

struct Message {
  std::size_t child = 0;  // position among the sender's children
  Bytes envelope;
};

struct FlowMetrics {
  std::vector<std::uint64_t> bytes_forwarded;     // per sending level
  std::vector<std::uint64_t> messages_forwarded;  // per sending level
  std::uint64_t compactions = 0;
  std::uint64_t leaf_merges = 0;
  std::uint64_t rows_ingested = 0;
  std::vector<std::uint64_t> leaf_rows;
};

class ProcessingElement {
 public:
  ProcessingElement(unsigned level, std::size_t index, const TreeConfig& config);

  unsigned level() const noexcept { return level_; }
  std::size_t index() const noexcept { return index_; }
  bool is_leaf() const noexcept { return level_ == depth_; }

  // Interior elements: appends to the buffer. Returns true once
  // buffered_rows() has reached capacity. Empty batches are ignored.
  bool buffer(const Table& batch);

  // Interior elements: concatenates the buffer, splits it on ID bits
  // [b*level, b*(level+1)) and serializes each non-empty part for the
  // matching child. Empties the buffer.
  std::vector<Message> compact();

  // Leaves: sorts the batch by (id, time) and stores it as a run; merges
  // all runs into one once there are more than kMaxRunsPerLeaf.
  // Throws RoutingViolation if a row's ID does not belong to this leaf.
  void absorb(const Table& batch);

  std::size_t buffered_rows() const noexcept { return buffered_rows_; }
  const std::vector<Table>& buffered() const noexcept { return buffered_; }
  const std::vector<Table>& runs() const noexcept { return runs_; }
  std::size_t stored_rows() const noexcept;
  std::uint64_t merges() const noexcept { return merges_; }

  // Throws RoutingViolation unless every ID's low b*level bits equal index().
  void check_prefix(const Table& batch) const;

 private:
  unsigned level_;
  std::size_t index_;
  unsigned depth_;
  unsigned bits_;
  std::size_t capacity_;
  CodecId codec_;

  std::vector<Table> buffered_;
  std::size_t buffered_rows_ = 0;
  std::vector<Table> runs_;
  std::uint64_t merges_ = 0;
};

class Tree {
 public:
  explicit Tree(TreeConfig config);

  // Feeds a batch to the root and delivers any resulting messages down the
  // tree. Batches need Int64 `id` and `time` fields and one fixed schema
  // (SchemaMismatch otherwise).
  void ingest(const Table& batch);

  // Forces compaction level by level until every row sits in a leaf.
  void drain();

  // Rows with the given id and time in [t0, t1], ascending by time. Only
  // rows that reached a leaf are visible, so call drain() first.
  Table query_track(std::int64_t id, std::int64_t t0, std::int64_t t1) const;

  const TreeConfig& config() const noexcept { return config_; }
  const ProcessingElement& element(unsigned level, std::size_t index) const;
  const ProcessingElement& root() const noexcept { return levels_[0][0]; }
  FlowMetrics metrics() const;
  std::size_t stored_rows() const noexcept;
  std::size_t buffered_rows() const noexcept;

 private:
  void deliver(unsigned level, std::size_t sender, std::vector<Message> messages);
  void pump();
  std::uint64_t receive(unsigned level, std::size_t index, std::vector<Message>& out);
  std::size_t leaf_of(std::int64_t id) const noexcept;

  TreeConfig config_;
  std::optional<Schema> schema_;
  std::vector<std::vector<ProcessingElement>> levels_;
  std::vector<std::vector<std::deque<Bytes>>> inboxes_;
  std::vector<std::uint64_t> bytes_forwarded_;
  std::vector<std::uint64_t> messages_forwarded_;
  std::uint64_t compactions_ = 0;
  std::uint64_t rows_ingested_ = 0;
};

}  // namespace pflow::flowsim
