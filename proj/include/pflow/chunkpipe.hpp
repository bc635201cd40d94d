#pragma once

// Chunked ("outer") compression modelled on a packet-granular compression
// accelerator: the input is cut into segments of at most 64 KiB, each
// segment is compressed independently by a worker pool, and no more than
// `window` uncompressed bytes are in flight at any time.
//
// Container (".pchk"), integers little-endian:
//
//   "PCHK" | u16 version=1 | u8 codec | u32 chunk_size | u64 total_uncompressed
//   | u32 crc32 (CRC-32/IEEE of the uncompressed bytes) | u32 chunk_count
//   | per chunk: u8 raw_flag | u32 stored_len | payload

#include <array>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string_view>
#include <thread>
#include <vector>

#include "pflow/bytes.hpp"
#include "pflow/codec.hpp"

namespace pflow::chunkpipe {

inline constexpr std::array<std::uint8_t, 4> kMagic = {'P', 'C', 'H', 'K'};
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kMinChunkSize = 4096;
inline constexpr std::size_t kMaxChunkSize = 65536;
inline constexpr std::size_t kDefaultWindow = 160ull * 1024 * 1024;
inline constexpr std::size_t kContainerHeaderSize = 4 + 2 + 1 + 4 + 8 + 4 + 4;
inline constexpr std::size_t kChunkHeaderSize = 5;

struct ChunkRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - begin; }
  bool operator==(const ChunkRange&) const = default;
};

struct ChunkPlan {
  std::vector<ChunkRange> ranges;
  std::size_t chunk_size = kMaxChunkSize;
};

// ceil(input_len / chunk_size) contiguous ranges covering [0, input_len).
// Throws BadChunkSize outside [4096, 65536].
ChunkPlan plan_chunks(std::size_t input_len, std::size_t chunk_size);

struct PipelineConfig {
  CodecId codec = CodecId::Deflate;
  std::size_t chunk_size = kMaxChunkSize;
  std::size_t workers = 1;
  std::size_t window = kDefaultWindow;

  // Throws BadChunkSize, WindowTooSmall or InvalidArgument (workers == 0).
  void validate() const;
};

enum class JobStatus { Queued, Running, Done, Failed };

std::string_view job_status_name(JobStatus s) noexcept;

struct JobTicket {
  std::uint64_t id = 0;
};

// Optional instrumentation. on_dispatch runs after a chunk's bytes are
// admitted to the window, on_complete just before they leave it.
struct PipelineHooks {
  std::function<void(std::size_t chunk_bytes)> on_dispatch;
  std::function<void(std::size_t chunk_bytes)> on_complete;
};

struct PipelineStats {
  std::size_t max_in_flight = 0;      // peak admitted uncompressed bytes
  std::size_t window_violations = 0;  // admissions that overshot the window
  std::size_t live_chunk_buffers = 0; // compressed chunk buffers currently held
  std::size_t tracked_jobs = 0;       // jobs not yet collected by await_result
};

// Worker pool plus a dispatcher that feeds one job's chunks at a time
// through the window. submit() may be called from any thread.
class ChunkPipeline {
 public:
  explicit ChunkPipeline(std::size_t workers, PipelineHooks hooks = {});
  ~ChunkPipeline();

  ChunkPipeline(const ChunkPipeline&) = delete;
  ChunkPipeline& operator=(const ChunkPipeline&) = delete;

  // Returns immediately. config.workers is ignored; the pool size is fixed
  // at construction. Throws PipelineShutdown after shutdown().
  JobTicket submit(Bytes input, const PipelineConfig& config);
  // Borrowing variant: `input` must outlive the job.
  JobTicket submit_view(ByteSpan input, const PipelineConfig& config);

  // Throws UnknownJob for a ticket that was never issued or already collected.
  JobStatus poll(const JobTicket& ticket) const;

  // Blocks until the job finishes, then releases it. Throws JobFailed
  // carrying the failing chunk's message and index.
  Bytes await_result(const JobTicket& ticket);

  // Finishes queued jobs, then rejects new submissions and stops the pool.
  void shutdown();

  PipelineStats stats() const;
  std::size_t workers() const noexcept { return workers_.size(); }

 private:
  struct Job;
  struct Task {
    std::shared_ptr<Job> job;
    std::size_t chunk = 0;
  };

  JobTicket enqueue(std::shared_ptr<Job> job);
  void dispatcher_loop();
  void worker_loop();
  void run_chunk(const Task& task);
  void finish_job(Job& job);
  void window_acquire(std::size_t n);
  void window_release(std::size_t n);

  PipelineHooks hooks_;

  mutable std::mutex mu_;
  std::condition_variable jobs_cv_;
  std::condition_variable tasks_cv_;
  std::condition_variable done_cv_;
  std::deque<std::shared_ptr<Job>> pending_;
  std::deque<Task> tasks_;
  std::map<std::uint64_t, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_id_ = 1;
  bool accepting_ = true;
  bool stopping_ = false;
  bool workers_stop_ = false;
  bool shut_down_ = false;

  mutable std::mutex window_mu_;
  std::condition_variable window_cv_;
  std::size_t window_limit_ = 0;
  std::size_t in_flight_ = 0;
  std::size_t max_in_flight_ = 0;
  std::size_t window_violations_ = 0;

  std::atomic<std::size_t> live_chunk_buffers_{0};

  std::vector<std::jthread> workers_;
  std::jthread dispatcher_;
};

// Synchronous compression on a pool of config.workers threads. Output bytes
// depend only on (input, codec, chunk_size). Errors: CodecFailure (with
// chunk index), BadChunkSize, WindowTooSmall.
Bytes compress_chunked(ByteSpan input, const PipelineConfig& config, PipelineHooks hooks = {});

// Errors: BadMagic, UnsupportedVersion, Truncated, LayoutMismatch,
// CodecFailure, CrcMismatch.
Bytes decompress_chunked(ByteSpan container, std::size_t workers = 1);

struct ContainerChunk {
  bool raw = true;
  std::size_t payload_offset = 0;
  std::size_t stored_len = 0;
};

struct ContainerInfo {
  CodecId codec = CodecId::Deflate;
  std::size_t chunk_size = kMaxChunkSize;
  std::uint64_t total_uncompressed = 0;
  std::uint32_t crc32 = 0;
  std::vector<ContainerChunk> chunks;
};

// Parses and bounds-checks the framing without decoding payloads.
ContainerInfo inspect(ByteSpan container);

// Builds a container from already-compressed chunk payloads (one per plan
// range; raw[i] marks verbatim chunks). Lets foreign encoders produce
// containers the pipeline can read.
Bytes assemble_container(CodecId codec, std::size_t chunk_size, ByteSpan input,
                         const std::vector<Bytes>& payloads, const std::vector<bool>& raw);

struct Throughput {
  double compress_gbps = 0;
  double decompress_gbps = 0;
};

// Deterministic, moderately compressible bytes (word-like tokens).
Bytes probe_input(std::size_t len, std::uint64_t seed);

// Median over `repetitions` of uncompressed bits / wall seconds.
Throughput throughput_probe(std::size_t input_len, const PipelineConfig& config, std::size_t repetitions,
                            std::uint64_t seed = 1);

}  // namespace pflow::chunkpipe
